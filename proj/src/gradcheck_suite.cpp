#include "sbre/gradcheck_suite.hpp"

#include <chrono>
#include <functional>
#include <iomanip>
#include <sstream>

#include "sbre/model.hpp"
#include "sbre/random.hpp"
#include "sbre/tensor.hpp"

namespace sbre {

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = rng.uniform(lo, hi);
  return t;
}

/// Reduces a node to a scalar through a fixed random projection so every
/// output coordinate contributes a distinct weight.
Var project(Graph& g, Var out, std::uint64_t seed) {
  Rng rng(derive_seed(seed, g.value(out).size()));
  Tensor w = random_tensor(rng, g.value(out).shape());
  return g.sum(g.hadamard(out, g.constant(std::move(w))));
}

struct CaseSpec {
  std::vector<Tensor> params;
  ScalarGraphFn fn;
};

using CaseFactory = std::function<CaseSpec(Rng&, std::uint64_t)>;

void run_op(OpCheck& check, const CaseFactory& make, std::size_t cases, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t c = 0; c < cases; ++c) {
    CaseSpec spec = make(rng, derive_seed(seed, c));
    std::vector<Tensor*> ptrs;
    for (Tensor& t : spec.params) ptrs.push_back(&t);
    const GradCheckResult r = grad_check(spec.fn, ptrs, 1e-5, 200, derive_seed(seed, c, 1));
    check.coords += r.coords_checked;
    ++check.cases;
    if (r.max_rel_error >= check.max_rel_error) {
      check.max_rel_error = r.max_rel_error;
      check.worst = "case " + std::to_string(c) + ", " + r.worst_location;
    }
  }
}

std::size_t between(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

/// Values kept away from 0 so that relu and max see no kinks within eps.
Tensor away_from_zero(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (double& x : t.data()) {
    const double m = rng.uniform(0.1, 1.0);
    x = rng.uniform() < 0.5 ? -m : m;
  }
  return t;
}

/// Distinct values per column so the maximum is unique by a clear margin.
Tensor distinct_columns(Rng& rng, std::size_t rows, std::size_t cols) {
  Tensor t({rows, cols});
  for (std::size_t c = 0; c < cols; ++c) {
    std::vector<std::size_t> order(rows);
    for (std::size_t r = 0; r < rows; ++r) order[r] = r;
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t r = 0; r < rows; ++r) t.at(order[r], c) = 0.1 * static_cast<double>(r) + rng.uniform(0.0, 0.05);
  }
  return t;
}

std::vector<std::pair<std::string, CaseFactory>> op_factories() {
  std::vector<std::pair<std::string, CaseFactory>> ops;

  ops.emplace_back("embed_lookup", [](Rng& rng, std::uint64_t s) {
    const std::size_t v = between(rng, 2, 9), d = between(rng, 1, 6), n = between(rng, 1, 8);
    std::vector<std::size_t> ids(n);
    for (auto& i : ids) i = rng.below(v);
    return CaseSpec{{random_tensor(rng, {v, d})}, [ids, s](Graph& g, std::span<const Var> p) {
                      return project(g, g.embed_lookup(p[0], ids), s);
                    }};
  });
  ops.emplace_back("concat_columns", [](Rng& rng, std::uint64_t s) {
    const std::size_t r = between(rng, 1, 6), a = between(rng, 1, 5), b = between(rng, 1, 5);
    return CaseSpec{{random_tensor(rng, {r, a}), random_tensor(rng, {r, b})},
                    [s](Graph& g, std::span<const Var> p) { return project(g, g.concat_columns(p[0], p[1]), s); }};
  });
  ops.emplace_back("pad_rows", [](Rng& rng, std::uint64_t s) {
    const std::size_t r = between(rng, 1, 6), c = between(rng, 1, 5), target = r + rng.below(4);
    return CaseSpec{{random_tensor(rng, {r, c})},
                    [s, target](Graph& g, std::span<const Var> p) { return project(g, g.pad_rows(p[0], target), s); }};
  });
  ops.emplace_back("conv1d", [](Rng& rng, std::uint64_t s) {
    const std::size_t k = between(rng, 1, 4), l = k + rng.below(6), d = between(rng, 1, 6), f = between(rng, 1, 5);
    return CaseSpec{{random_tensor(rng, {l, d}), random_tensor(rng, {k, d, f}), random_tensor(rng, {f})},
                    [s](Graph& g, std::span<const Var> p) { return project(g, g.conv1d(p[0], p[1], p[2]), s); }};
  });
  ops.emplace_back("max_over_time", [](Rng& rng, std::uint64_t s) {
    const std::size_t r = between(rng, 1, 8), c = between(rng, 1, 6);
    return CaseSpec{{distinct_columns(rng, r, c)},
                    [s](Graph& g, std::span<const Var> p) { return project(g, g.max_over_time(p[0]), s); }};
  });
  ops.emplace_back("relu", [](Rng& rng, std::uint64_t s) {
    return CaseSpec{{away_from_zero(rng, {between(rng, 1, 5), between(rng, 1, 5)})},
                    [s](Graph& g, std::span<const Var> p) { return project(g, g.relu(p[0]), s); }};
  });
  ops.emplace_back("tanh", [](Rng& rng, std::uint64_t s) {
    return CaseSpec{{random_tensor(rng, {between(rng, 1, 12)}, -2.0, 2.0)},
                    [s](Graph& g, std::span<const Var> p) { return project(g, g.tanh(p[0]), s); }};
  });
  for (Activation act : {Activation::identity, Activation::relu, Activation::tanh}) {
    const std::string name = act == Activation::identity ? "dense" : act == Activation::relu ? "dense_relu" : "dense_tanh";
    ops.emplace_back(name, [act](Rng& rng, std::uint64_t s) {
      const std::size_t in = between(rng, 1, 8), out = between(rng, 1, 6);
      Tensor x = random_tensor(rng, {in});
      Tensor w = random_tensor(rng, {out, in});
      Tensor b = random_tensor(rng, {out});
      if (act == Activation::relu) {
        // Nudge pre-activations away from the kink.
        for (std::size_t o = 0; o < out; ++o) {
          double z = b[o];
          for (std::size_t i = 0; i < in; ++i) z += w.at(o, i) * x[i];
          if (std::abs(z) < 0.05) b[o] += z < 0 ? -0.1 : 0.1;
        }
      }
      return CaseSpec{{std::move(x), std::move(w), std::move(b)}, [s, act](Graph& g, std::span<const Var> p) {
                        return project(g, g.dense(p[0], p[1], p[2], act), s);
                      }};
    });
  }
  ops.emplace_back("concat", [](Rng& rng, std::uint64_t s) {
    const std::size_t parts = between(rng, 1, 5);
    std::vector<Tensor> ts;
    for (std::size_t i = 0; i < parts; ++i) ts.push_back(random_tensor(rng, {between(rng, 1, 6)}));
    return CaseSpec{std::move(ts), [s](Graph& g, std::span<const Var> p) { return project(g, g.concat(p), s); }};
  });
  ops.emplace_back("subtract3", [](Rng& rng, std::uint64_t s) {
    const std::size_t n = between(rng, 1, 12);
    return CaseSpec{{random_tensor(rng, {n}), random_tensor(rng, {n}), random_tensor(rng, {n})},
                    [s](Graph& g, std::span<const Var> p) { return project(g, g.subtract3(p[0], p[1], p[2]), s); }};
  });
  ops.emplace_back("hadamard", [](Rng& rng, std::uint64_t s) {
    const std::size_t n = between(rng, 1, 12);
    return CaseSpec{{random_tensor(rng, {n}), random_tensor(rng, {n})},
                    [s](Graph& g, std::span<const Var> p) { return project(g, g.hadamard(p[0], p[1]), s); }};
  });
  ops.emplace_back("mul_mask", [](Rng& rng, std::uint64_t s) {
    const std::size_t n = between(rng, 1, 12);
    Tensor mask({n});
    for (double& m : mask.data()) m = rng.uniform() < 0.5 ? 0.0 : 2.0;
    return CaseSpec{{random_tensor(rng, {n})}, [s, mask](Graph& g, std::span<const Var> p) {
                      return project(g, g.mul_mask(p[0], mask), s);
                    }};
  });
  ops.emplace_back("scale", [](Rng& rng, std::uint64_t s) {
    const double factor = rng.uniform(-3.0, 3.0);
    return CaseSpec{{random_tensor(rng, {between(rng, 1, 4), between(rng, 1, 4)})},
                    [s, factor](Graph& g, std::span<const Var> p) { return project(g, g.scale(p[0], factor), s); }};
  });
  ops.emplace_back("sum", [](Rng& rng, std::uint64_t) {
    return CaseSpec{{random_tensor(rng, {between(rng, 1, 5), between(rng, 1, 5)})},
                    [](Graph& g, std::span<const Var> p) { return g.sum(p[0]); }};
  });
  ops.emplace_back("softmax_xent", [](Rng& rng, std::uint64_t) {
    const std::size_t k = between(rng, 2, 10), gold = rng.below(k);
    return CaseSpec{{random_tensor(rng, {k}, -3.0, 3.0)},
                    [gold](Graph& g, std::span<const Var> p) { return g.softmax_xent(p[0], gold); }};
  });
  return ops;
}

TokenSequence random_sequence(Rng& rng, std::size_t max_len, std::size_t vocab) {
  TokenSequence seq;
  const std::size_t n = between(rng, 1, max_len);
  for (std::size_t i = 0; i < n; ++i) {
    seq.word_ids.push_back(rng.below(vocab));
    seq.role_ids.push_back(rng.below(ModelConfig::kDepDim));
    seq.pos_ids.push_back(rng.below(ModelConfig::kPosDim));
  }
  return seq;
}

CaseSpec model_case(Rng& rng, std::uint64_t s) {
  ModelConfig config;
  config.word_dim = 4;
  config.kernel_widths = {2, 3};
  config.filters = 3;
  config.hidden = 5;
  config.num_classes = 3;
  config.max_block_len = 8;
  config.max_entity_len = 3;
  config.dropout = 0.5;
  config.seed = s;
  const std::size_t vocab = 10;
  ModelParams params = init_params(config, vocab, nullptr);

  InstanceFeatures features;
  features.block = random_sequence(rng, 7, vocab);
  features.e1 = random_sequence(rng, 3, vocab);
  features.e2 = random_sequence(rng, 3, vocab);
  features.label = rng.below(config.num_classes);
  const Tensor mask = dropout_mask(config, derive_seed(s, 2));

  // Non-zero biases keep all-padding windows off the relu kink.
  std::vector<Tensor> tensors{params.word_table};
  for (auto& enc : params.encoders)
    for (auto& conv : enc.convs) {
      tensors.push_back(random_tensor(rng, conv.kernel.shape(), -0.5, 0.5));
      tensors.push_back(random_tensor(rng, conv.bias.shape(), -0.5, 0.5));
    }
  tensors.push_back(random_tensor(rng, params.hidden_w.shape(), -0.5, 0.5));
  tensors.push_back(random_tensor(rng, params.hidden_b.shape(), -0.5, 0.5));
  tensors.push_back(random_tensor(rng, params.out_w.shape(), -0.5, 0.5));
  tensors.push_back(random_tensor(rng, params.out_b.shape(), -0.5, 0.5));

  auto fn = [config, features, mask](Graph& g, std::span<const Var> p) {
    BoundParams bound;
    std::size_t i = 0;
    bound.word_table = p[i++];
    for (auto& enc : bound.convs)
      for (std::size_t w = 0; w < config.kernel_widths.size(); ++w) {
        const Var kernel = p[i++];
        enc.emplace_back(kernel, p[i++]);
      }
    bound.hidden_w = p[i++];
    bound.hidden_b = p[i++];
    bound.out_w = p[i++];
    bound.out_b = p[i++];
    const ForwardVars v = forward(g, bound, features, config, &mask);
    return g.softmax_xent(v.logits, features.label);
  };
  return CaseSpec{std::move(tensors), fn};
}

}  // namespace

bool GradSuiteReport::passed() const {
  if (checks.empty()) return false;
  for (const auto& c : checks)
    if (!(c.max_rel_error < tolerance)) return false;
  return true;
}

GradSuiteReport run_grad_suite(const GradSuiteOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  GradSuiteReport report;
  report.tolerance = options.tolerance;
  std::uint64_t tag = 0;
  for (const auto& [name, factory] : op_factories()) {
    OpCheck check;
    check.name = name;
    run_op(check, factory, options.cases_per_op, derive_seed(options.seed, ++tag));
    report.checks.push_back(std::move(check));
  }
  OpCheck model;
  model.name = "model";
  run_op(model, model_case, options.model_cases, derive_seed(options.seed, ++tag));
  report.checks.push_back(std::move(model));
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

std::string format_grad_suite(const GradSuiteReport& report) {
  std::ostringstream out;
  for (const auto& c : report.checks) {
    out << std::left << std::setw(16) << c.name << " cases=" << c.cases << " coords=" << c.coords
        << " max_rel=" << std::scientific << std::setprecision(3) << c.max_rel_error << std::defaultfloat
        << (c.max_rel_error < report.tolerance ? "  ok" : "  FAIL (" + c.worst + ")") << '\n';
  }
  out << (report.passed() ? "gradient suite passed" : "gradient suite FAILED") << " in " << std::fixed
      << std::setprecision(2) << report.seconds << " s\n";
  return out.str();
}

}  // namespace sbre
