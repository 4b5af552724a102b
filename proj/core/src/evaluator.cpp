#include "bsnas/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <optional>
#include <thread>

#include "bsnas/errors.hpp"

namespace bsnas {

namespace {

double checked_evaluate(const Evaluator& evaluator, const Architecture& arch, Rng noise) {
  double score = 0.0;
  try {
    score = evaluator.evaluate(arch, noise);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw EvaluatorError(evaluator.name() + " failed on " + arch.canonical() + ": " + e.what());
  }
  if (!std::isfinite(score) || score < 0.0 || score > 1.0) {
    throw EvaluatorError(evaluator.name() + " returned out-of-range score for " +
                         arch.canonical());
  }
  return score;
}

}  // namespace

std::vector<double> evaluate_batch(const Evaluator& evaluator, std::span<const Architecture> archs,
                                   const Rng& noise_base, std::uint64_t first_index, int workers) {
  std::vector<double> scores(archs.size(), 0.0);
  const std::size_t threads =
      evaluator.concurrency_safe()
          ? std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), archs.size())
          : 1;
  if (threads <= 1) {
    for (std::size_t i = 0; i < archs.size(); ++i) {
      scores[i] = checked_evaluate(evaluator, archs[i], noise_base.split(first_index + i));
    }
    return scores;
  }

  std::vector<std::exception_ptr> errors(archs.size());
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < archs.size(); i += threads) {
          try {
            scores[i] = checked_evaluate(evaluator, archs[i], noise_base.split(first_index + i));
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (const auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }
  return scores;
}

}  // namespace bsnas
