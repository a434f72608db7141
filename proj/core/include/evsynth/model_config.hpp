#pragma once

// Text configuration of a prevalence model. INI-style sections:
//
//   [model]        year, regions, groups, hierarchy = on|off, bias = on|off
//   [populations]  male.Inner-London = 650000
//   [hyperpriors]  factor_pi_region, factor_delta_region, factor_pi_group,
//                  factor_delta_group, top_sd, rho_concentration,
//                  nu = uniform 0 0.15 | normal 0.05 0.03
//   [groups]       weight.female.LR = 1      (survey inclusion weights)
//   [sources]      ua-sti = undiagnosed; bias logit normal 0 0.3
//   [data]         file = data.csv, and/or inline CSV rows
//                  source,gender,group,region,family,x,n
//   [dynamics]     settings of the joint prevalence/incidence fit
//
// Comments start with '#' or ';' at the beginning of a line.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evsynth/graph.hpp"
#include "evsynth/prevalence.hpp"

namespace evsynth::prevalence {

class ConfigError : public std::runtime_error {
 public:
  enum class Kind { parse, semantic };
  ConfigError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// What a data source measures, as a function of (rho, pi, delta).
enum class Measure {
  rho,            // sum of rho over the groups
  pi,             // prevalence among the groups
  delta,          // diagnosed fraction among infected members
  undiagnosed,    // undiagnosed prevalence, pi (1 - delta)
  mixture,        // survey-weighted prevalence of a group mixture
  mixture_delta,  // survey-weighted diagnosed fraction of a mixture
  diagnosed,      // Poisson count of diagnosed reports
  split,          // multinomial split of diagnosed reports by group
};

std::string_view measure_name(Measure m);
std::optional<Measure> parse_measure(std::string_view s);
Likelihood family_for(Measure m);

enum class BiasScale { logit, log, identity };
std::string_view scale_name(BiasScale s);

/// theta' = theta + epsilon on `scale`, with epsilon ~ prior.
struct BiasSpec {
  BiasScale scale = BiasScale::logit;
  PriorSpec prior = PriorSpec::normal(0.0, 1.0);
};

struct SourceSpec {
  std::string name;
  Measure measure = Measure::pi;
  std::optional<BiasSpec> bias;
};

/// One data row as written; cell fields stay textual until validation so a
/// misspelt region is reported as a semantic error.
struct DataRecord {
  std::string source;
  std::string gender;
  std::string group;
  std::string region;
  std::string family;
  std::uint64_t x = 0;
  std::uint64_t n = 0;
  std::size_t line = 0;
};

struct Hyperpriors {
  double factor_pi_region = 1.3;    // sigma_pi
  double factor_delta_region = 1.3; // sigma_delta
  double factor_pi_group = 1.6;     // omega_pi
  double factor_delta_group = 1.3;  // omega_delta
  double top_sd = 100.0;
  double rho_concentration = 1.0;
  PriorSpec nu = PriorSpec::uniform(0.0, 0.15);
};

/// Half-normal scale whose 95% point corresponds to a multiplicative factor
/// on the odds-ratio scale: ln(factor) / 1.96.
double factor_to_scale(double factor);

struct ModelConfig {
  int year = 2008;
  std::vector<Region> regions{kAllRegions.begin(), kAllRegions.end()};
  std::vector<RiskGroup> groups{kAllGroups.begin(), kAllGroups.end()};
  bool hierarchy = true;
  bool bias = true;
  std::array<std::array<double, kRegionCount>, kGenderCount> population{};  // 0 = not given
  Hyperpriors hyper;
  std::array<double, kGroupCount> survey_weight = [] {
    std::array<double, kGroupCount> w{};
    w.fill(1.0);
    return w;
  }();
  std::map<std::string, SourceSpec, std::less<>> sources;
  std::vector<DataRecord> data;
  std::map<std::string, std::string, std::less<>> dynamics;
  std::filesystem::path base_dir;
  std::vector<std::filesystem::path> data_files;

  bool has_group(RiskGroup g) const;
  bool has_region(Region r) const;
};

/// Parses configuration text. Relative data files resolve against base_dir.
/// Throws ConfigError(parse) on malformed text.
ModelConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ModelConfig load_config(const std::filesystem::path& path);

/// Rows of `source,gender,group,region,family,x,n`; the header line is
/// optional. Throws ConfigError(parse) on malformed rows.
std::vector<DataRecord> parse_data_csv(std::string_view text, std::size_t first_line = 1);
std::string format_data_csv(std::span<const DataRecord> records);

/// Writes a config that parses back to `config` (data rows inline).
std::string format_config(const ModelConfig& config);

/// A data record resolved against the model: gender, region, group set,
/// measure and family.
struct ResolvedRecord {
  const DataRecord* record = nullptr;
  const SourceSpec* source = nullptr;
  Gender gender = Gender::male;
  Region region = Region::inner_london;
  std::vector<RiskGroup> groups;
  Likelihood family = Likelihood::binomial;
};

/// Semantic validation; throws ConfigError(semantic) naming the offending
/// cell or line.
std::vector<ResolvedRecord> resolve(const ModelConfig& config);

/// Reference parameter values of the synthetic England & Wales model.
PrevalenceParams reference_params();
BiasParams reference_bias();

/// Full synthetic configuration: 13 groups, 3 regions and, per region, one
/// data item for each data-to-parameter relationship of the surveillance
/// system (direct group sizes, prevalence and diagnosed fractions, unlinked
/// anonymous surveys of undiagnosed prevalence, the pregnant-women mixture,
/// diagnosed totals and their group split). Counts are the expected values
/// under reference_params().
ModelConfig reference_config();

}  // namespace evsynth::prevalence
