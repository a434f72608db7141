#include "evsynth/prevalence.hpp"

#include <cmath>
#include <stdexcept>

#include "evsynth/distributions.hpp"

namespace evsynth::prevalence {

namespace {

constexpr std::array<RiskGroup, 8> kMaleGroups{
    RiskGroup::msm_sti,       RiskGroup::msm_non_sti, RiskGroup::msm_past, RiskGroup::male_idu_current,
    RiskGroup::male_idu_past, RiskGroup::male_ssa,    RiskGroup::male_sti, RiskGroup::male_lr,
};
constexpr std::array<RiskGroup, 5> kFemaleGroups{
    RiskGroup::female_idu_current, RiskGroup::female_idu_past, RiskGroup::female_ssa,
    RiskGroup::female_sti,         RiskGroup::female_lr,
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto lower = [](char c) { return c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c; };
    if (lower(a[i]) != lower(b[i])) return false;
  }
  return true;
}

double diagnosed_term(const PrevalenceParams& p, const BiasParams& b, RiskGroup g, Region r) {
  return (1.0 - b.nu_at(g)) * p.delta_at(g, r) * p.pi_at(g, r) * p.rho_at(g, r);
}

}  // namespace

Gender gender_of(RiskGroup g) { return index_of(g) < kMaleGroups.size() ? Gender::male : Gender::female; }

GroupFamily family_of(RiskGroup g) {
  switch (g) {
    case RiskGroup::msm_sti:
    case RiskGroup::msm_non_sti:
    case RiskGroup::msm_past: return GroupFamily::msm;
    case RiskGroup::male_idu_current:
    case RiskGroup::male_idu_past:
    case RiskGroup::female_idu_current:
    case RiskGroup::female_idu_past: return GroupFamily::idu;
    case RiskGroup::male_ssa:
    case RiskGroup::female_ssa: return GroupFamily::ssa;
    case RiskGroup::male_sti:
    case RiskGroup::female_sti: return GroupFamily::sti;
    case RiskGroup::male_lr:
    case RiskGroup::female_lr: return GroupFamily::lr;
  }
  return GroupFamily::lr;
}

std::optional<RiskGroup> counterpart(RiskGroup g) {
  switch (g) {
    case RiskGroup::male_idu_current: return RiskGroup::female_idu_current;
    case RiskGroup::male_idu_past: return RiskGroup::female_idu_past;
    case RiskGroup::male_ssa: return RiskGroup::female_ssa;
    case RiskGroup::male_sti: return RiskGroup::female_sti;
    case RiskGroup::male_lr: return RiskGroup::female_lr;
    case RiskGroup::female_idu_current: return RiskGroup::male_idu_current;
    case RiskGroup::female_idu_past: return RiskGroup::male_idu_past;
    case RiskGroup::female_ssa: return RiskGroup::male_ssa;
    case RiskGroup::female_sti: return RiskGroup::male_sti;
    case RiskGroup::female_lr: return RiskGroup::male_lr;
    default: return std::nullopt;
  }
}

std::span<const RiskGroup> groups_of(Gender g) {
  if (g == Gender::male) return kMaleGroups;
  return kFemaleGroups;
}

std::string_view group_name(RiskGroup g) {
  switch (g) {
    case RiskGroup::msm_sti: return "MSM-STI";
    case RiskGroup::msm_non_sti: return "MSM-non-STI";
    case RiskGroup::msm_past: return "MSM-past";
    case RiskGroup::male_idu_current:
    case RiskGroup::female_idu_current: return "IDU-current";
    case RiskGroup::male_idu_past:
    case RiskGroup::female_idu_past: return "IDU-past";
    case RiskGroup::male_ssa:
    case RiskGroup::female_ssa: return "SSA";
    case RiskGroup::male_sti:
    case RiskGroup::female_sti: return "STI";
    case RiskGroup::male_lr:
    case RiskGroup::female_lr: return "LR";
  }
  return "?";
}

std::string_view gender_name(Gender g) { return g == Gender::male ? "male" : "female"; }

std::string_view region_name(Region r) {
  switch (r) {
    case Region::inner_london: return "Inner-London";
    case Region::outer_london: return "Outer-London";
    case Region::rest_of_ew: return "Rest-of-EW";
  }
  return "?";
}

std::string_view family_name(GroupFamily f) {
  switch (f) {
    case GroupFamily::msm: return "MSM";
    case GroupFamily::idu: return "IDU";
    case GroupFamily::ssa: return "SSA";
    case GroupFamily::sti: return "STI";
    case GroupFamily::lr: return "LR";
  }
  return "?";
}

std::string cell_name(RiskGroup g) {
  return std::string(gender_name(gender_of(g))) + "." + std::string(group_name(g));
}

std::optional<Gender> parse_gender(std::string_view s) {
  s = trim(s);
  if (iequals(s, "male") || iequals(s, "m") || iequals(s, "men")) return Gender::male;
  if (iequals(s, "female") || iequals(s, "f") || iequals(s, "women")) return Gender::female;
  return std::nullopt;
}

std::optional<Region> parse_region(std::string_view s) {
  s = trim(s);
  for (Region r : kAllRegions) {
    if (iequals(s, region_name(r))) return r;
  }
  if (iequals(s, "Rest-of-E&W")) return Region::rest_of_ew;
  return std::nullopt;
}

std::optional<RiskGroup> parse_group(Gender gender, std::string_view s) {
  s = trim(s);
  for (RiskGroup g : groups_of(gender)) {
    if (iequals(s, group_name(g))) return g;
  }
  return std::nullopt;
}

std::vector<RiskGroup> expand_groups(Gender gender, std::string_view expr) {
  std::vector<RiskGroup> out;
  auto add = [&](RiskGroup g) {
    for (RiskGroup h : out) {
      if (h == g) return false;
    }
    out.push_back(g);
    return true;
  };
  while (true) {
    const auto plus = expr.find('+');
    const std::string_view part = trim(expr.substr(0, plus));
    std::vector<RiskGroup> members;
    if (iequals(part, "ALL")) {
      members.assign(groups_of(gender).begin(), groups_of(gender).end());
    } else if (iequals(part, "MSM")) {
      if (gender == Gender::male) members = {RiskGroup::msm_sti, RiskGroup::msm_non_sti, RiskGroup::msm_past};
    } else if (iequals(part, "IDU")) {
      members = gender == Gender::male
                    ? std::vector{RiskGroup::male_idu_current, RiskGroup::male_idu_past}
                    : std::vector{RiskGroup::female_idu_current, RiskGroup::female_idu_past};
    } else if (iequals(part, "NSSA")) {
      for (RiskGroup g : groups_of(gender)) {
        if (family_of(g) != GroupFamily::ssa) members.push_back(g);
      }
    } else if (auto g = parse_group(gender, part)) {
      members = {*g};
    }
    if (members.empty()) return {};
    for (RiskGroup g : members) {
      if (!add(g)) return {};  // overlapping parts
    }
    if (plus == std::string_view::npos) break;
    expr.remove_prefix(plus + 1);
  }
  return out;
}

double mu_diagnosed(const PrevalenceParams& params, const BiasParams& bias, Gender gender, Region region) {
  double total = 0.0;
  for (RiskGroup g : groups_of(gender)) total += diagnosed_term(params, bias, g, region);
  return params.population_at(gender, region) * total;
}

std::vector<double> xi_group_shares(const PrevalenceParams& params, const BiasParams& bias, Gender gender,
                                    Region region) {
  std::vector<double> shares;
  double total = 0.0;
  for (RiskGroup g : groups_of(gender)) {
    shares.push_back(diagnosed_term(params, bias, g, region));
    total += shares.back();
  }
  if (!(total > 0.0)) throw std::domain_error("group shares undefined: no diagnosed infections");
  for (double& s : shares) s /= total;
  return shares;
}

double link_male_to_female(double female, double lor) {
  if (!(female > 0.0 && female < 1.0)) throw std::domain_error("female probability must lie strictly inside (0, 1)");
  return dist::expit(lor + dist::logit(female));
}

AggregatePrevalence aggregate_prevalence(const PrevalenceParams& params, Gender gender, Region region) {
  AggregatePrevalence a;
  for (RiskGroup g : groups_of(gender)) {
    const double infected = params.rho_at(g, region) * params.pi_at(g, region);
    a.diagnosed += infected * params.delta_at(g, region);
    a.undiagnosed += infected * (1.0 - params.delta_at(g, region));
  }
  a.total = a.diagnosed + a.undiagnosed;
  return a;
}

AggregatePrevalence aggregate_prevalence(const PrevalenceParams& params, Region region) {
  AggregatePrevalence a;
  double n_total = 0.0;
  for (Gender s : kGenders) {
    const double n = params.population_at(s, region);
    const AggregatePrevalence part = aggregate_prevalence(params, s, region);
    a.diagnosed += n * part.diagnosed;
    a.undiagnosed += n * part.undiagnosed;
    n_total += n;
  }
  if (!(n_total > 0.0)) throw std::invalid_argument("region has no population");
  a.diagnosed /= n_total;
  a.undiagnosed /= n_total;
  a.total = a.diagnosed + a.undiagnosed;
  return a;
}

double composite_survey_functional(std::span<const double> rho, std::span<const double> pi,
                                   std::span<const double> weights) {
  if (rho.empty() || rho.size() != pi.size() || rho.size() != weights.size()) {
    throw std::invalid_argument("mixture needs aligned, non-empty rho, pi and weights");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    num += weights[i] * rho[i] * pi[i];
    den += weights[i] * rho[i];
  }
  if (!(den > 0.0)) throw std::invalid_argument("mixture has zero total weight");
  return num / den;
}

double composite_diagnosed_functional(std::span<const double> rho, std::span<const double> pi,
                                      std::span<const double> delta, std::span<const double> weights) {
  if (rho.empty() || rho.size() != pi.size() || rho.size() != delta.size() || rho.size() != weights.size()) {
    throw std::invalid_argument("mixture needs aligned, non-empty rho, pi, delta and weights");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    num += weights[i] * rho[i] * pi[i] * delta[i];
    den += weights[i] * rho[i] * pi[i];
  }
  if (!(den > 0.0)) throw std::invalid_argument("mixture has no infected members");
  return num / den;
}

}  // namespace evsynth::prevalence
