#include "evsynth/prevalence_model.hpp"

#include <algorithm>
#include <set>

namespace evsynth::prevalence {

namespace {

std::string cell_label(std::string_view prefix, RiskGroup g, Region r) {
  return std::string(prefix) + "." + cell_name(g) + "." + std::string(region_name(r));
}

class ModelBuilder {
 public:
  explicit ModelBuilder(const ModelConfig& config) : cfg_(config) { model_.config = config; }

  PrevalenceModel build() {
    resolved_ = resolve(cfg_);
    add_hierarchy();
    add_nu();
    for (Region r : cfg_.regions) add_region(r);
    add_bias_parameters();
    add_data();
    add_summaries();
    model_.graph = std::move(b_).freeze();
    return std::move(model_);
  }

 private:
  bool present(RiskGroup g) const { return cfg_.has_group(g); }

  bool linked(RiskGroup g) const {
    if (!cfg_.hierarchy || gender_of(g) != Gender::male) return false;
    const auto f = counterpart(g);
    return f && present(*f) && present(g);
  }

  CellNodes& cell(RiskGroup g, Region r) { return model_.cells[index_of(g)][index_of(r)]; }

  NodeId basic(std::string label, Support support, PriorSpec prior, double initial, std::string role) {
    return b_.add_basic(BasicParameterNode{std::move(label), support, std::move(prior), initial, std::move(role), true});
  }

  NodeId functional(std::string label, Expr e, ValueRange range, std::string role = {}, bool monitored = false) {
    if (auto id = b_.find(label)) return *id;
    return b_.add_functional(FunctionalNode{std::move(label), std::move(e), range, std::move(role), monitored});
  }

  void add_hierarchy() {
    std::set<GroupFamily> families;
    for (RiskGroup g : cfg_.groups) {
      if (linked(g)) families.insert(family_of(g));
    }
    if (families.empty()) return;
    const auto& h = cfg_.hyper;
    auto hyper = [&](std::string label, Support s, PriorSpec p, double init) {
      const NodeId id = basic(std::move(label), s, std::move(p), init, "hyper");
      model_.hyperparameters.push_back(id);
      return id;
    };
    const NodeId pi_mean = hyper("Pi", Support::real, PriorSpec::normal(0.0, h.top_sd), 0.0);
    const NodeId delta_mean = hyper("Delta", Support::real, PriorSpec::normal(0.0, h.top_sd), 0.0);
    const double s_pi = factor_to_scale(h.factor_pi_region);
    const double s_delta = factor_to_scale(h.factor_delta_region);
    const double w_pi = factor_to_scale(h.factor_pi_group);
    const double w_delta = factor_to_scale(h.factor_delta_group);
    sigma_pi_ = hyper("sigma_pi", Support::positive_real, PriorSpec::half_normal(s_pi), s_pi);
    sigma_delta_ = hyper("sigma_delta", Support::positive_real, PriorSpec::half_normal(s_delta), s_delta);
    const NodeId omega_pi = hyper("omega_pi", Support::positive_real, PriorSpec::half_normal(w_pi), w_pi);
    const NodeId omega_delta = hyper("omega_delta", Support::positive_real, PriorSpec::half_normal(w_delta), w_delta);
    for (GroupFamily f : families) {
      const std::string name(family_name(f));
      family_pi_[f] = hyper("P." + name, Support::real, PriorSpec::hierarchical_normal(pi_mean, omega_pi), 0.0);
      family_delta_[f] =
          hyper("D." + name, Support::real, PriorSpec::hierarchical_normal(delta_mean, omega_delta), 0.0);
    }
  }

  void add_nu() {
    if (!cfg_.bias) return;
    std::set<Gender> reported;
    for (const auto& rr : resolved_) {
      const Measure m = rr.source->measure;
      if (m == Measure::diagnosed || m == Measure::split) reported.insert(rr.gender);
    }
    const PriorSpec& prior = cfg_.hyper.nu;
    const double init = prior.family == PriorSpec::Family::uniform
                            ? 0.5 * (prior.parameters[0] + prior.parameters[1])
                            : std::clamp(prior.parameters[0], 0.01, 0.99);
    for (RiskGroup g : cfg_.groups) {
      if (!reported.contains(gender_of(g))) continue;
      model_.nu[index_of(g)] = basic("nu." + cell_name(g), Support::unit_interval, prior, init, "nu");
    }
  }

  void add_region(Region r) {
    for (Gender s : kGenders) {
      std::vector<RiskGroup> gs;
      for (RiskGroup g : groups_of(s)) {
        if (present(g)) gs.push_back(g);
      }
      if (gs.size() == 1) {
        cell(gs[0], r).rho = functional(cell_label("rho", gs[0], r), constant(1.0), ValueRange::probability, "rho");
      } else if (gs.size() > 1) {
        std::vector<std::string> labels;
        for (RiskGroup g : gs) labels.push_back(cell_label("rho", g, r));
        const auto ids = b_.add_simplex_block("rho." + std::string(gender_name(s)) + "." + std::string(region_name(r)),
                                              labels, std::vector<double>(gs.size(), cfg_.hyper.rho_concentration),
                                              "rho");
        for (std::size_t i = 0; i < gs.size(); ++i) cell(gs[i], r).rho = ids[i];
      }
    }
    // Women first so linked male cells can reference them.
    for (Gender s : {Gender::female, Gender::male}) {
      for (RiskGroup g : groups_of(s)) {
        if (!present(g)) continue;
        CellNodes& c = cell(g, r);
        if (linked(g)) {
          const RiskGroup f = *counterpart(g);
          const GroupFamily fam = family_of(g);
          const std::string where = std::string(group_name(g)) + "." + std::string(region_name(r));
          c.lor_pi = basic("lor_pi." + where, Support::real,
                           PriorSpec::hierarchical_normal(family_pi_.at(fam), sigma_pi_), 0.0, "lor_pi");
          c.lor_delta = basic("lor_delta." + where, Support::real,
                              PriorSpec::hierarchical_normal(family_delta_.at(fam), sigma_delta_), 0.0, "lor_delta");
          const CellNodes& fc = cell(f, r);
          c.pi = functional(cell_label("pi", g, r), expit(ref(*c.lor_pi) + logit(ref(*fc.pi))),
                            ValueRange::probability, "pi", true);
          c.delta = functional(cell_label("delta", g, r), expit(ref(*c.lor_delta) + logit(ref(*fc.delta))),
                               ValueRange::probability, "delta", true);
        } else {
          c.pi = basic(cell_label("pi", g, r), Support::unit_interval, PriorSpec::uniform(0.0, 1.0), 0.1, "pi");
          c.delta = basic(cell_label("delta", g, r), Support::unit_interval, PriorSpec::uniform(0.0, 1.0), 0.5, "delta");
        }
      }
    }
  }

  void add_bias_parameters() {
    for (const auto& rr : resolved_) {
      const SourceSpec& src = *rr.source;
      if (!src.bias || model_.bias_epsilon.contains(src.name)) continue;
      const PriorSpec& p = src.bias->prior;
      double init = p.family == PriorSpec::Family::uniform ? 0.5 * (p.parameters[0] + p.parameters[1]) : p.parameters[0];
      model_.bias_epsilon[src.name] = basic("epsilon." + src.name, Support::real, p, init, "bias");
    }
  }

  Expr rho(RiskGroup g, Region r) { return ref(*cell(g, r).rho); }
  Expr pi(RiskGroup g, Region r) { return ref(*cell(g, r).pi); }
  Expr delta(RiskGroup g, Region r) { return ref(*cell(g, r).delta); }

  /// (1 - nu) rho pi delta, the expected share of a cell among diagnosed reports.
  NodeId reported(RiskGroup g, Region r) {
    Expr e = rho(g, r) * pi(g, r) * delta(g, r);
    if (auto nu = model_.nu[index_of(g)]) e = (constant(1.0) - ref(*nu)) * e;
    return functional(cell_label("reported", g, r), std::move(e), ValueRange::probability);
  }

  static std::string group_text(const std::vector<RiskGroup>& gs) {
    std::string out;
    for (RiskGroup g : gs) out += (out.empty() ? "" : "+") + std::string(group_name(g));
    return out;
  }

  std::string psi_label(std::string_view what, const ResolvedRecord& rr) const {
    return "psi." + std::string(what) + "." + std::string(gender_name(rr.gender)) + "." + group_text(rr.groups) + "." +
           std::string(region_name(rr.region));
  }

  /// Functional measured by a binomial or Poisson record, before bias.
  NodeId measured(const ResolvedRecord& rr) {
    const auto& gs = rr.groups;
    const Region r = rr.region;
    const bool single = gs.size() == 1;
    auto mixture = [&](std::vector<double> w, auto share, auto value) {
      std::vector<Expr> shares, values;
      for (RiskGroup g : gs) {
        shares.push_back(share(g));
        values.push_back(value(g));
      }
      return weighted_mixture(std::move(w), std::move(shares), std::move(values));
    };
    const std::vector<double> ones(gs.size(), 1.0);
    std::vector<double> survey;
    for (RiskGroup g : gs) survey.push_back(cfg_.survey_weight[index_of(g)]);
    auto rho_of = [&](RiskGroup g) { return rho(g, r); };
    auto infected_of = [&](RiskGroup g) { return rho(g, r) * pi(g, r); };
    auto pi_of = [&](RiskGroup g) { return pi(g, r); };
    auto delta_of = [&](RiskGroup g) { return delta(g, r); };
    auto undiag_of = [&](RiskGroup g) { return pi(g, r) * (constant(1.0) - delta(g, r)); };

    const Measure m = rr.source->measure;
    const std::string label = psi_label(measure_name(m), rr);
    switch (m) {
      case Measure::rho: {
        if (single) return *cell(gs[0], r).rho;
        std::vector<Expr> terms;
        for (RiskGroup g : gs) terms.push_back(rho(g, r));
        return functional(label, sum(std::move(terms)), ValueRange::probability);
      }
      case Measure::pi:
        if (single) return *cell(gs[0], r).pi;
        return functional(label, mixture(ones, rho_of, pi_of), ValueRange::probability);
      case Measure::delta:
        if (single) return *cell(gs[0], r).delta;
        return functional(label, mixture(ones, infected_of, delta_of), ValueRange::probability);
      case Measure::undiagnosed:
        if (single) return functional(label, undiag_of(gs[0]), ValueRange::probability);
        return functional(label, mixture(ones, rho_of, undiag_of), ValueRange::probability);
      case Measure::mixture:
        if (single) return *cell(gs[0], r).pi;
        return functional(label, mixture(survey, rho_of, pi_of), ValueRange::probability);
      case Measure::mixture_delta:
        if (single) return *cell(gs[0], r).delta;
        return functional(label, mixture(survey, infected_of, delta_of), ValueRange::probability);
      case Measure::diagnosed: {
        std::vector<Expr> terms;
        for (RiskGroup g : gs) terms.push_back(ref(reported(g, r)));
        const double n = cfg_.population[index_of(rr.gender)][index_of(r)];
        return functional("mu." + std::string(gender_name(rr.gender)) + "." + group_text(gs) + "." +
                              std::string(region_name(r)),
                          constant(n) * sum(std::move(terms)), ValueRange::non_negative);
      }
      case Measure::split: break;
    }
    throw GraphError("split records have no scalar target");
  }

  NodeId biased(NodeId target, const ResolvedRecord& rr) {
    const SourceSpec& src = *rr.source;
    if (!src.bias) return target;
    const Expr eps = ref(model_.bias_epsilon.at(src.name));
    Expr e = ref(target);
    switch (src.bias->scale) {
      case BiasScale::logit: e = expit(logit(std::move(e)) + eps); break;
      case BiasScale::log: e = exp(log(std::move(e)) + eps); break;
      case BiasScale::identity: e = std::move(e) + eps; break;
    }
    return functional("psi." + src.name + "." + std::string(gender_name(rr.gender)) + "." + group_text(rr.groups) +
                          "." + std::string(region_name(rr.region)),
                      std::move(e), ValueRange::probability);
  }

  std::string unique_label(std::string base) {
    if (!b_.find(base)) return base;
    for (int k = 2;; ++k) {
      std::string candidate = base + "#" + std::to_string(k);
      if (!b_.find(candidate)) return candidate;
    }
  }

  void add_data() {
    // Poisson totals first so splits can point at them.
    std::map<std::tuple<Gender, Region, std::vector<RiskGroup>>, std::pair<NodeId, std::uint64_t>> totals;
    for (std::size_t i = 0; i < resolved_.size(); ++i) {
      const auto& rr = resolved_[i];
      if (rr.family == Likelihood::multinomial) continue;
      const DataRecord& rec = *rr.record;
      const NodeId target = biased(measured(rr), rr);
      DataItem item;
      item.family = rr.family;
      item.x = rec.x;
      item.n = rr.family == Likelihood::binomial ? rec.n : 0;
      item.source = rec.source;
      const NodeId id = b_.add_data(DataNode{
          unique_label("y." + rec.source + "." + std::string(gender_name(rr.gender)) + "." + group_text(rr.groups) +
                       "." + std::string(region_name(rr.region))),
          {target},
          item,
          std::nullopt});
      model_.data_rows.push_back({id, {i}});
      if (rr.family == Likelihood::poisson) {
        auto sorted = rr.groups;
        std::sort(sorted.begin(), sorted.end());
        totals[{rr.gender, rr.region, sorted}] = {id, rec.x};
      }
    }
    // Group splits: records sharing (source, gender, region) form one node.
    std::map<std::tuple<std::string, Gender, Region>, std::vector<std::size_t>> splits;
    for (std::size_t i = 0; i < resolved_.size(); ++i) {
      const auto& rr = resolved_[i];
      if (rr.family == Likelihood::multinomial) splits[{rr.record->source, rr.gender, rr.region}].push_back(i);
    }
    for (const auto& [key, rows] : splits) {
      const auto& [source, gender, region] = key;
      const std::string where = "data line " + std::to_string(resolved_[rows.front()].record->line) + ": ";
      if (rows.size() < 2) throw ConfigError(ConfigError::Kind::semantic, where + "a group split needs at least two categories");
      std::vector<RiskGroup> all;
      std::vector<Expr> numerators;
      std::uint64_t total = 0;
      DataItem item;
      item.family = Likelihood::multinomial;
      item.source = source;
      for (std::size_t i : rows) {
        const auto& rr = resolved_[i];
        std::vector<Expr> terms;
        for (RiskGroup g : rr.groups) {
          if (std::find(all.begin(), all.end(), g) != all.end()) {
            throw ConfigError(ConfigError::Kind::semantic, where + "split categories overlap in " + cell_name(g));
          }
          all.push_back(g);
          terms.push_back(ref(reported(g, region)));
        }
        numerators.push_back(sum(std::move(terms)));
        item.counts.push_back(rr.record->x);
        total += rr.record->x;
      }
      std::vector<NodeId> targets;
      for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& rr = resolved_[rows[k]];
        targets.push_back(functional("xi." + source + "." + std::string(gender_name(gender)) + "." +
                                         group_text(rr.groups) + "." + std::string(region_name(region)),
                                     normalized_share(k, numerators), ValueRange::probability));
      }
      item.n = total;
      std::optional<NodeId> total_from;
      std::sort(all.begin(), all.end());
      if (auto it = totals.find({gender, region, all}); it != totals.end() && it->second.second == total) {
        total_from = it->second.first;
      }
      const NodeId id = b_.add_data(DataNode{
          unique_label("y." + source + "." + std::string(gender_name(gender)) + "." + std::string(region_name(region))),
          std::move(targets), std::move(item), total_from});
      model_.data_rows.push_back({id, rows});
    }
  }

  void add_summaries() {
    for (Region r : cfg_.regions) {
      std::vector<Expr> infected, undiagnosed;
      for (Gender s : kGenders) {
        const double n = cfg_.population[index_of(s)][index_of(r)];
        if (!(n > 0.0)) continue;
        for (RiskGroup g : groups_of(s)) {
          if (!present(g)) continue;
          infected.push_back(constant(n) * rho(g, r) * pi(g, r));
          undiagnosed.push_back(constant(n) * rho(g, r) * pi(g, r) * (constant(1.0) - delta(g, r)));
        }
      }
      if (infected.empty()) continue;
      const std::string region(region_name(r));
      functional("infections." + region, sum(std::move(infected)), ValueRange::non_negative, "summary", true);
      functional("undiagnosed." + region, sum(std::move(undiagnosed)), ValueRange::non_negative, "summary", true);
    }
  }

  const ModelConfig& cfg_;
  GraphBuilder b_;
  PrevalenceModel model_;
  std::vector<ResolvedRecord> resolved_;
  NodeId sigma_pi_{}, sigma_delta_{};
  std::map<GroupFamily, NodeId> family_pi_, family_delta_;
};

}  // namespace

std::size_t PrevalenceModel::theta_dimension() const {
  static const std::set<std::string, std::less<>> roles{"rho", "pi", "delta", "lor_pi", "lor_delta"};
  std::size_t n = 0;
  for (NodeId id : graph.basic_nodes()) {
    if (roles.contains(graph.basic(id).role)) ++n;
  }
  for (const auto& block : graph.simplex_blocks()) {
    if (block.role == "rho") --n;
  }
  return n;
}

PrevalenceParams PrevalenceModel::params(const Values& values) const {
  PrevalenceParams p;
  p.year = config.year;
  p.population = config.population;
  for (RiskGroup g : kAllGroups) {
    for (Region r : kAllRegions) {
      const CellNodes& c = cells[index_of(g)][index_of(r)];
      if (c.rho) p.rho_at(g, r) = values[c.rho->index];
      if (c.pi) p.pi_at(g, r) = values[c.pi->index];
      if (c.delta) p.delta_at(g, r) = values[c.delta->index];
    }
  }
  return p;
}

BiasParams PrevalenceModel::bias(const Values& values) const {
  BiasParams b;
  for (RiskGroup g : kAllGroups) {
    if (auto id = nu[index_of(g)]) b.nu_at(g) = values[id->index];
  }
  return b;
}

std::vector<DataRecord> PrevalenceModel::records_with(std::span<const DataItem> observations) const {
  if (observations.size() != data_rows.size()) throw std::invalid_argument("one observation per data node expected");
  std::vector<DataRecord> out = config.data;
  for (std::size_t i = 0; i < data_rows.size(); ++i) {
    const auto& rows = data_rows[i].second;
    const DataItem& item = observations[i];
    if (item.family == Likelihood::multinomial) {
      if (item.counts.size() != rows.size()) throw std::invalid_argument("split size does not match its rows");
      for (std::size_t k = 0; k < rows.size(); ++k) {
        out[rows[k]].x = item.counts[k];
        out[rows[k]].n = item.n;
      }
    } else {
      out[rows.front()].x = item.x;
      out[rows.front()].n = item.family == Likelihood::binomial ? item.n : 0;
    }
  }
  return out;
}

PrevalenceModel build_prevalence_graph(const ModelConfig& config) { return ModelBuilder(config).build(); }

}  // namespace evsynth::prevalence
