#include "deus/upscale.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "deus/errors.hpp"

namespace deus {

namespace {

using json = nlohmann::json;

bool in_strategy(std::size_t i, std::size_t n, PositionStrategy s) {
  switch (s) {
    case PositionStrategy::Btm:
      return i <= n / 2;
    case PositionStrategy::Mid:
      return i > n / 4 && i <= 3 * n / 4;
    case PositionStrategy::Top:
      return i >= n / 2 && i < n;
    case PositionStrategy::TB:
      return i <= n / 4 || (i >= 3 * n / 4 && i < n);
  }
  return false;
}

// Expanded indices of the inserted layers: the r-th insertion (1-based rank
// r among insert_after) lands at base index + r.
void finish_interpolation_plan(ExpansionPlan& plan) {
  plan.k = plan.insert_after.size();
  plan.m_total = plan.n_base + plan.k;
  std::size_t rank = 0;
  for (std::size_t i : plan.insert_after) {
    ++rank;
    const std::size_t expanded = i + rank;
    plan.trainable.push_back(expanded);
    plan.new_layers.push_back(NewLayerProvenance{expanded, {i, i + 1}});
  }
}

}  // namespace

std::string_view strategy_name(PositionStrategy s) {
  switch (s) {
    case PositionStrategy::Btm: return "btm";
    case PositionStrategy::Mid: return "mid";
    case PositionStrategy::Top: return "top";
    case PositionStrategy::TB: return "tb";
  }
  return "?";
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::OptDeus: return "opt-deus";
    case Method::AvgDeus: return "avg-deus";
    case Method::LlamaPro: return "llama-pro";
    case Method::Solar: return "solar";
    case Method::Lesa: return "lesa";
  }
  return "?";
}

std::vector<std::size_t> strategy_index_set(std::size_t n, PositionStrategy strategy) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i <= n; ++i) {
    if (in_strategy(i, n, strategy)) out.push_back(i);
  }
  return out;
}

ExpansionPlan plan_interpolation(std::size_t n, double ratio, PositionStrategy strategy,
                                 Method method) {
  if (method == Method::Lesa) {
    throw PlanError("not implemented: lesa requires auxiliary-network training");
  }
  if (method != Method::OptDeus && method != Method::AvgDeus) {
    throw PlanError(std::string("method ") + std::string(method_name(method)) +
                    " is not an interpolation method");
  }
  if (!(ratio > 0.0) || ratio > 0.5) {
    throw PlanError("interpolation ratio must be in (0, 0.5], got " + std::to_string(ratio));
  }
  const auto k = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  if (k == 0) {
    throw PlanError("ratio " + std::to_string(ratio) + " yields zero new layers for n=" +
                    std::to_string(n));
  }
  const std::vector<std::size_t> set = strategy_index_set(n, strategy);
  if (set.size() < k) {
    throw PlanError("strategy " + std::string(strategy_name(strategy)) + " offers " +
                    std::to_string(set.size()) + " positions, need " + std::to_string(k));
  }

  ExpansionPlan plan;
  plan.method = method;
  plan.strategy = strategy;
  plan.n_base = n;
  if (set.size() == k) {
    plan.insert_after = set;
  } else {
    const double stride = static_cast<double>(set.size()) / static_cast<double>(k);
    for (std::size_t t = 0; t < k; ++t) {
      plan.insert_after.push_back(set[static_cast<std::size_t>(stride * static_cast<double>(t))]);
    }
  }
  finish_interpolation_plan(plan);
  return plan;
}

ExpansionPlan plan_llama_pro(std::size_t n, std::size_t g, std::size_t m, std::size_t p) {
  if (g == 0 || m == 0 || g * m != n) {
    throw PlanError("llama-pro needs g*m == n, got g=" + std::to_string(g) + " m=" +
                    std::to_string(m) + " n=" + std::to_string(n));
  }
  if (p == 0 || p > m) {
    throw PlanError("llama-pro needs 1 <= p <= m, got p=" + std::to_string(p));
  }
  ExpansionPlan plan;
  plan.method = Method::LlamaPro;
  plan.n_base = n;
  plan.k = g * p;
  plan.m_total = n + plan.k;
  plan.group_count = g;
  plan.group_size = m;
  plan.copies_per_group = p;
  for (std::size_t t = 1; t <= g; ++t) {
    // Group t spans base layers (t-1)m+1 .. tm; its copies land right after
    // the group in the expanded ordering.
    const std::size_t group_end_expanded = t * (m + p) - p;
    for (std::size_t c = 0; c < p; ++c) {
      const std::size_t source = t * m - p + 1 + c;
      const std::size_t expanded = group_end_expanded + 1 + c;
      plan.insert_after.push_back(t * m);
      plan.trainable.push_back(expanded);
      plan.new_layers.push_back(NewLayerProvenance{expanded, {source}});
    }
  }
  return plan;
}

ExpansionPlan plan_solar(std::size_t n, std::size_t m) {
  if (m == 0 || m > n || 2 * m < n) {
    throw PlanError("solar needs m <= n and 2m >= n, got m=" + std::to_string(m) + " n=" +
                    std::to_string(n));
  }
  ExpansionPlan plan;
  plan.method = Method::Solar;
  plan.n_base = n;
  plan.m_total = 2 * m;
  plan.k = 2 * m - n;
  plan.solar_m = m;
  // All layers train; record the top-stack copies' provenance.
  for (std::size_t e = 1; e <= 2 * m; ++e) {
    plan.trainable.push_back(e);
    const std::size_t source = e <= m ? e : n - 2 * m + e;
    plan.new_layers.push_back(NewLayerProvenance{e, {source}});
  }
  return plan;
}

TensorArchive expand(const TensorArchive& archive, const ExpansionPlan& plan,
                     const OtParams& params) {
  const ModelConfig& cfg = archive.config;
  if (plan.n_base != cfg.n_layers) {
    throw PlanError("plan built for n=" + std::to_string(plan.n_base) +
                    " but archive has " + std::to_string(cfg.n_layers) + " layers");
  }
  if (plan.method != Method::OptDeus && plan.method != Method::AvgDeus) {
    throw PlanError(std::string("expand() executes interpolation plans only; use the ") +
                    std::string(method_name(plan.method)) + " entry point");
  }
  for (std::size_t i : plan.insert_after) {
    if (i < 1 || i >= cfg.n_layers) {
      throw PlanError("insert position " + std::to_string(i) +
                      " needs a following layer (n=" + std::to_string(cfg.n_layers) + ")");
    }
  }

  std::vector<LayerWeights> layers;
  layers.reserve(plan.m_total);
  auto next_insert = plan.insert_after.begin();
  for (std::size_t i = 1; i <= cfg.n_layers; ++i) {
    const LayerWeights base = archive.layer_view(i);
    layers.push_back(base);
    if (next_insert != plan.insert_after.end() && *next_insert == i) {
      ++next_insert;
      try {
        if (plan.method == Method::OptDeus) {
          layers.push_back(fuse_layers(base, archive.layer_view(i + 1), cfg, params).weights);
        } else {
          layers.push_back(fuse_avg(base, archive.layer_view(i + 1)));
        }
      } catch (const SolverError& e) {
        throw SolverError("fusing after layer " + std::to_string(i) + ": " + e.what());
      }
    }
  }

  ModelConfig out_cfg = cfg;
  out_cfg.n_layers = plan.m_total;
  return TensorArchive::assemble(out_cfg, archive.embed(), layers, archive.final_norm(),
                                 archive.lm_head());
}

TensorArchive expand_llama_pro(const TensorArchive& archive, std::size_t g, std::size_t m,
                               std::size_t p) {
  const ModelConfig& cfg = archive.config;
  const ExpansionPlan plan = plan_llama_pro(cfg.n_layers, g, m, p);
  std::vector<LayerWeights> layers;
  layers.reserve(plan.m_total);
  for (std::size_t t = 1; t <= g; ++t) {
    for (std::size_t i = (t - 1) * m + 1; i <= t * m; ++i) {
      layers.push_back(archive.layer_view(i));
    }
    for (std::size_t c = 0; c < p; ++c) {
      layers.push_back(zeroed_copy(archive.layer_view(t * m - p + 1 + c)));
    }
  }
  ModelConfig out_cfg = cfg;
  out_cfg.n_layers = plan.m_total;
  return TensorArchive::assemble(out_cfg, archive.embed(), layers, archive.final_norm(),
                                 archive.lm_head());
}

TensorArchive expand_solar(const TensorArchive& archive, std::size_t m) {
  const ModelConfig& cfg = archive.config;
  const std::size_t n = cfg.n_layers;
  plan_solar(n, m);  // validates m
  std::vector<LayerWeights> layers;
  layers.reserve(2 * m);
  for (std::size_t i = 1; i <= m; ++i) layers.push_back(archive.layer_view(i));
  for (std::size_t i = n - m + 1; i <= n; ++i) layers.push_back(archive.layer_view(i));
  ModelConfig out_cfg = cfg;
  out_cfg.n_layers = 2 * m;
  return TensorArchive::assemble(out_cfg, archive.embed(), layers, archive.final_norm(),
                                 archive.lm_head());
}

std::string freeze_mask_json(const ExpansionPlan& plan) {
  std::vector<std::size_t> frozen;
  std::set<std::size_t> trainable(plan.trainable.begin(), plan.trainable.end());
  for (std::size_t e = 1; e <= plan.m_total; ++e) {
    if (!trainable.count(e)) frozen.push_back(e);
  }
  const json j{{"trainable", plan.trainable},
               {"frozen", frozen},
               {"convention", "1-based-expanded"}};
  return j.dump();
}

std::string plan_json(const ExpansionPlan& plan, const OtParams& params) {
  json new_layers = json::array();
  for (const auto& nl : plan.new_layers) {
    new_layers.push_back(json{{"expanded_index", nl.expanded_index},
                              {"source_layers", nl.source_layers}});
  }
  json j{{"method", std::string(method_name(plan.method))},
         {"n_base", plan.n_base},
         {"k", plan.k},
         {"m_total", plan.m_total},
         {"insert_after", plan.insert_after},
         {"trainable", plan.trainable},
         {"new_layers", new_layers}};
  if (plan.strategy) j["strategy"] = std::string(strategy_name(*plan.strategy));
  if (plan.method == Method::LlamaPro) {
    j["groups"] = json{{"g", plan.group_count}, {"m", plan.group_size},
                       {"p", plan.copies_per_group}};
  }
  if (plan.method == Method::Solar) j["solar_m"] = plan.solar_m;
  if (plan.method == Method::OptDeus) {
    j["ot"] = json{{"epsilon", params.epsilon},
                   {"max_iter", params.max_iter},
                   {"tol", params.tol},
                   {"normalize_cost", params.normalize_cost},
                   {"head_blocked", params.head_blocked}};
  }
  return j.dump();
}

}  // namespace deus
