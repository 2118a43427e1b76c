#pragma once

// Training text for the bundled trigram language profiles.

namespace iilm::langid_samples {

inline constexpr const char* kEnglish =
    "The city council met on Tuesday evening to discuss the new budget for the coming year. "
    "Several members said that they were worried about the rising cost of public transport, "
    "while others argued that the money should be spent on schools and hospitals instead. "
    "After a long debate the mayor proposed a compromise which was accepted by a narrow majority. "
    "Many people in the town have been waiting for this decision for months, and the local "
    "newspaper reported that shop owners were relieved. The weather this week has been cold and "
    "wet, but the forecast for the weekend looks much better. Children will return to school "
    "next Monday after the holidays, and parents are being asked to check the new timetable. "
    "In other news, the football club announced that its stadium would be renovated during the "
    "summer. The work is expected to take about three months and will cost several million "
    "pounds. Supporters have welcomed the plan, although some of them are concerned about "
    "where the team will play in the meantime. Scientists at the university have published a "
    "study showing that people who walk every day live longer and feel happier than those who "
    "do not. The researchers followed thousands of volunteers over a period of ten years. "
    "What do you think about these results? Would you change your habits because of them? "
    "There is no simple answer, but it is clear that small changes can make a big difference. "
    "The government has said that it will look carefully at the report before making any "
    "decisions about new rules for the health service. Everyone agrees that this is an "
    "important question for the future of the country and for the people who live here.";

inline constexpr const char* kGerman =
    "Der Stadtrat hat sich am Dienstagabend getroffen, um über den neuen Haushalt für das "
    "kommende Jahr zu sprechen. Mehrere Mitglieder sagten, dass sie sich über die steigenden "
    "Kosten des öffentlichen Verkehrs Sorgen machen, während andere meinten, das Geld sollte "
    "lieber für Schulen und Krankenhäuser ausgegeben werden. Nach einer langen Debatte schlug "
    "der Bürgermeister einen Kompromiss vor, der von einer knappen Mehrheit angenommen wurde. "
    "Viele Menschen in der Stadt haben seit Monaten auf diese Entscheidung gewartet, und die "
    "örtliche Zeitung berichtete, dass die Ladenbesitzer erleichtert waren. Das Wetter war "
    "in dieser Woche kalt und nass, aber die Vorhersage für das Wochenende sieht viel besser "
    "aus. Die Kinder kehren nach den Ferien am nächsten Montag in die Schule zurück, und die "
    "Eltern werden gebeten, den neuen Stundenplan zu prüfen. Außerdem hat der Fußballverein "
    "angekündigt, dass sein Stadion im Sommer renoviert wird. Die Arbeiten sollen ungefähr "
    "drei Monate dauern und mehrere Millionen Euro kosten. Die Anhänger haben den Plan "
    "begrüßt, obwohl einige von ihnen sich fragen, wo die Mannschaft in der Zwischenzeit "
    "spielen wird. Wissenschaftler der Universität haben eine Studie veröffentlicht, die "
    "zeigt, dass Menschen, die jeden Tag zu Fuß gehen, länger leben und sich glücklicher "
    "fühlen als diejenigen, die das nicht tun. Die Forscher haben tausende Freiwillige über "
    "einen Zeitraum von zehn Jahren begleitet. Was denken Sie über diese Ergebnisse? Würden "
    "Sie deshalb Ihre Gewohnheiten ändern? Es gibt keine einfache Antwort, aber es ist klar, "
    "dass kleine Veränderungen einen großen Unterschied machen können. Die Regierung hat "
    "gesagt, dass sie den Bericht sorgfältig prüfen wird, bevor sie neue Regeln für das "
    "Gesundheitswesen beschließt. Alle sind sich einig, dass dies eine wichtige Frage für "
    "die Zukunft des Landes und für die Menschen ist, die hier leben.";

inline constexpr const char* kFrench =
    "Le conseil municipal s'est réuni mardi soir pour discuter du nouveau budget de l'année "
    "prochaine. Plusieurs membres ont dit qu'ils étaient inquiets de la hausse du coût des "
    "transports publics, tandis que d'autres ont affirmé que l'argent devrait plutôt être "
    "dépensé pour les écoles et les hôpitaux. Après un long débat, le maire a proposé un "
    "compromis qui a été accepté par une faible majorité. Beaucoup de gens dans la ville "
    "attendaient cette décision depuis des mois, et le journal local a rapporté que les "
    "commerçants étaient soulagés. Le temps cette semaine a été froid et humide, mais les "
    "prévisions pour le week-end sont bien meilleures. Les enfants retourneront à l'école "
    "lundi prochain après les vacances, et les parents sont priés de vérifier le nouvel "
    "emploi du temps. Par ailleurs, le club de football a annoncé que son stade serait "
    "rénové pendant l'été. Les travaux devraient durer environ trois mois et coûter "
    "plusieurs millions d'euros. Les supporters ont accueilli le projet avec plaisir, bien "
    "que certains se demandent où l'équipe jouera en attendant. Des chercheurs de "
    "l'université ont publié une étude qui montre que les personnes qui marchent chaque jour "
    "vivent plus longtemps et se sentent plus heureuses que celles qui ne le font pas. Que "
    "pensez-vous de ces résultats? Il n'y a pas de réponse simple, mais il est clair que de "
    "petits changements peuvent faire une grande différence pour la santé de chacun.";

inline constexpr const char* kSpanish =
    "El ayuntamiento se reunió el martes por la noche para hablar del nuevo presupuesto para "
    "el año que viene. Varios miembros dijeron que estaban preocupados por el aumento del "
    "coste del transporte público, mientras que otros afirmaron que el dinero debería "
    "gastarse en escuelas y hospitales. Después de un largo debate, el alcalde propuso un "
    "acuerdo que fue aceptado por una mayoría muy pequeña. Mucha gente de la ciudad llevaba "
    "meses esperando esta decisión, y el periódico local informó de que los dueños de las "
    "tiendas estaban aliviados. El tiempo esta semana ha sido frío y lluvioso, pero el "
    "pronóstico para el fin de semana es mucho mejor. Los niños volverán a la escuela el "
    "próximo lunes después de las vacaciones, y se pide a los padres que revisen el nuevo "
    "horario. Además, el club de fútbol anunció que su estadio será renovado durante el "
    "verano. Las obras durarán unos tres meses y costarán varios millones de euros. Los "
    "aficionados han recibido bien el plan, aunque algunos se preguntan dónde jugará el "
    "equipo mientras tanto. Unos científicos de la universidad han publicado un estudio que "
    "muestra que las personas que caminan todos los días viven más y se sienten más felices "
    "que las que no lo hacen. ¿Qué piensa usted de estos resultados? No hay una respuesta "
    "sencilla, pero está claro que los pequeños cambios pueden marcar una gran diferencia.";

}  // namespace iilm::langid_samples
