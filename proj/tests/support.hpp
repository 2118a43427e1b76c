#pragma once

// Helpers shared by the unit and acceptance suites.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <unistd.h>

#include "iilm/corpus.hpp"
#include "iilm/model.hpp"
#include "iilm/random.hpp"
#include "iilm/tensor.hpp"

namespace iilm::testing {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("iilm-test-" + std::to_string(::getpid()) + "-" + std::to_string(stamp) + "-" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Central differences against tape gradients over every scalar of every
// parameter. Entries whose absolute error is within abs_tol count as exact.
inline GradcheckResult gradcheck(ModelParams& params,
                                 const std::function<Var(Tape&, ModelParams&)>& loss_fn,
                                 double step = 1e-4, double abs_tol = 1e-9) {
  for (auto& [name, t] : params) t.clear_grad();
  {
    Tape tape;
    tape.backward(loss_fn(tape, params));
  }
  auto eval = [&]() {
    Tape tape;
    return tape.scalar(loss_fn(tape, params));
  };
  GradcheckResult r;
  for (auto& [name, t] : params) {
    std::vector<double> analytic(t.numel(), 0.0);
    if (t.has_grad()) {
      const auto g = std::as_const(t).grad();
      std::copy(g.begin(), g.end(), analytic.begin());
    }
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double orig = t[i];
      t[i] = orig + step;
      const double up = eval();
      t[i] = orig - step;
      const double down = eval();
      t[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double err = std::abs(numeric - analytic[i]);
      ++r.checked;
      if (err <= abs_tol) continue;
      const double scale = std::max(std::abs(numeric), std::abs(analytic[i]));
      r.max_rel_error = std::max(r.max_rel_error, err / scale);
    }
  }
  for (auto& [name, t] : params) t.clear_grad();
  return r;
}

// Random document: n_sent sentences of 1..max_words ids drawn from
// [kReservedIds, vocab), each boundary-terminated.
inline Document random_document(Rng& rng, std::size_t n_sent, std::size_t max_words,
                                std::size_t vocab) {
  Document d;
  for (std::size_t s = 0; s < n_sent; ++s) {
    std::vector<TokenId> sent;
    const std::size_t n = 1 + rng.index(max_words);
    for (std::size_t i = 0; i < n; ++i) {
      sent.push_back(static_cast<TokenId>(kReservedIds + rng.index(vocab - kReservedIds)));
    }
    sent.push_back(kBoundaryId);
    d.sentences.push_back(std::move(sent));
  }
  return d;
}

// Single window covering the whole document.
inline TrainingWindow whole_window(const Document& doc, std::size_t max_len = 256) {
  WindowOptions o;
  o.max_len = max_len;
  auto w = make_windows(doc, o);
  return w.front();
}

inline ModelConfig tiny_config(ModelMode mode, std::size_t vocab = 16) {
  ModelConfig c;
  c.mode = mode;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_layers = 2;
  c.d_ff = 12;
  c.vocab_size = vocab;
  c.max_len = 64;
  c.dropout = 0.0;
  return c;
}

}  // namespace iilm::testing
