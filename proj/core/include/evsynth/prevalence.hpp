#pragma once

// Risk-group structure of the HIV prevalence model and the closed-form
// quantities built on (rho, pi, delta): diagnosed-count means, group shares
// among the diagnosed, male/female odds-ratio links and survey mixtures.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evsynth::prevalence {

enum class Gender : std::uint8_t { male, female };

enum class RiskGroup : std::uint8_t {
  msm_sti,
  msm_non_sti,
  msm_past,
  male_idu_current,
  male_idu_past,
  male_ssa,
  male_sti,
  male_lr,
  female_idu_current,
  female_idu_past,
  female_ssa,
  female_sti,
  female_lr,
};

enum class Region : std::uint8_t { inner_london, outer_london, rest_of_ew };

/// Groups that share one male-to-female hierarchy mean (IDU current and past
/// share the IDU family).
enum class GroupFamily : std::uint8_t { msm, idu, ssa, sti, lr };

inline constexpr std::size_t kGroupCount = 13;
inline constexpr std::size_t kRegionCount = 3;
inline constexpr std::size_t kGenderCount = 2;

inline constexpr std::array<RiskGroup, kGroupCount> kAllGroups{
    RiskGroup::msm_sti,          RiskGroup::msm_non_sti,        RiskGroup::msm_past,
    RiskGroup::male_idu_current, RiskGroup::male_idu_past,      RiskGroup::male_ssa,
    RiskGroup::male_sti,         RiskGroup::male_lr,            RiskGroup::female_idu_current,
    RiskGroup::female_idu_past,  RiskGroup::female_ssa,         RiskGroup::female_sti,
    RiskGroup::female_lr,
};
inline constexpr std::array<Region, kRegionCount> kAllRegions{Region::inner_london, Region::outer_london,
                                                              Region::rest_of_ew};
inline constexpr std::array<Gender, kGenderCount> kGenders{Gender::male, Gender::female};

constexpr std::size_t index_of(RiskGroup g) { return static_cast<std::size_t>(g); }
constexpr std::size_t index_of(Region r) { return static_cast<std::size_t>(r); }
constexpr std::size_t index_of(Gender g) { return static_cast<std::size_t>(g); }

Gender gender_of(RiskGroup g);
GroupFamily family_of(RiskGroup g);
/// The same group in the other gender (none for MSM groups).
std::optional<RiskGroup> counterpart(RiskGroup g);
std::span<const RiskGroup> groups_of(Gender g);

/// Names without the gender prefix: MSM-STI, MSM-non-STI, MSM-past,
/// IDU-current, IDU-past, SSA, STI, LR.
std::string_view group_name(RiskGroup g);
std::string_view gender_name(Gender g);
std::string_view region_name(Region r);
std::string_view family_name(GroupFamily f);
/// "male.MSM-STI" style label.
std::string cell_name(RiskGroup g);

std::optional<Gender> parse_gender(std::string_view s);
std::optional<Region> parse_region(std::string_view s);
std::optional<RiskGroup> parse_group(Gender gender, std::string_view s);

/// Expands a group expression for one gender: a group name, an alias
/// (ALL, MSM, IDU, NSSA = everyone not born in SSA) or a '+'-joined list of
/// those. Empty result means the expression did not parse.
std::vector<RiskGroup> expand_groups(Gender gender, std::string_view expr);

template <class T>
using GroupRegionTable = std::array<std::array<T, kRegionCount>, kGroupCount>;

struct PrevalenceParams {
  GroupRegionTable<double> rho{};
  GroupRegionTable<double> pi{};
  GroupRegionTable<double> delta{};
  std::array<std::array<double, kRegionCount>, kGenderCount> population{};
  int year = 2008;

  double& rho_at(RiskGroup g, Region r) { return rho[index_of(g)][index_of(r)]; }
  double& pi_at(RiskGroup g, Region r) { return pi[index_of(g)][index_of(r)]; }
  double& delta_at(RiskGroup g, Region r) { return delta[index_of(g)][index_of(r)]; }
  double& population_at(Gender s, Region r) { return population[index_of(s)][index_of(r)]; }
  double rho_at(RiskGroup g, Region r) const { return rho[index_of(g)][index_of(r)]; }
  double pi_at(RiskGroup g, Region r) const { return pi[index_of(g)][index_of(r)]; }
  double delta_at(RiskGroup g, Region r) const { return delta[index_of(g)][index_of(r)]; }
  double population_at(Gender s, Region r) const { return population[index_of(s)][index_of(r)]; }
};

struct BiasParams {
  std::array<double, kGroupCount> nu{};

  double& nu_at(RiskGroup g) { return nu[index_of(g)]; }
  double nu_at(RiskGroup g) const { return nu[index_of(g)]; }
};

/// Expected number of diagnosed reports N * sum_g (1-nu) delta pi rho over
/// the groups of one gender.
double mu_diagnosed(const PrevalenceParams& params, const BiasParams& bias, Gender gender, Region region);

/// Shares xi_g proportional to (1-nu) delta pi rho, ordered as groups_of(gender).
/// Throws std::domain_error when every numerator is zero.
std::vector<double> xi_group_shares(const PrevalenceParams& params, const BiasParams& bias, Gender gender,
                                    Region region);

/// expit(lor + logit(female)). Throws std::domain_error unless 0 < female < 1.
double link_male_to_female(double female, double lor);

struct AggregatePrevalence {
  double total = 0.0;
  double diagnosed = 0.0;
  double undiagnosed = 0.0;
};

/// Prevalence among one gender in one region, split by diagnosis status.
AggregatePrevalence aggregate_prevalence(const PrevalenceParams& params, Gender gender, Region region);
/// Both genders, weighted by population size.
AggregatePrevalence aggregate_prevalence(const PrevalenceParams& params, Region region);

/// Prevalence in a weighted mixture of groups: sum w rho pi / sum w rho.
/// Throws std::invalid_argument on an empty or zero-weight mixture.
double composite_survey_functional(std::span<const double> rho, std::span<const double> pi,
                                   std::span<const double> weights);
/// Diagnosed fraction in the same mixture: sum w rho pi delta / sum w rho pi.
double composite_diagnosed_functional(std::span<const double> rho, std::span<const double> pi,
                                      std::span<const double> delta, std::span<const double> weights);

}  // namespace evsynth::prevalence
