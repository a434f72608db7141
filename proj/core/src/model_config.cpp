#include "evsynth/model_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "evsynth/graph_io.hpp"

namespace evsynth::prevalence {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    const auto pos = s.find(sep);
    out.push_back(trim(s.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return out;
}

std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  throw ConfigError(ConfigError::Kind::parse, "line " + std::to_string(line) + ": " + what);
}

[[noreturn]] void semantic_fail(const std::string& what) { throw ConfigError(ConfigError::Kind::semantic, what); }

double to_double(std::string_view s, std::size_t line) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) parse_fail(line, "expected a number, got '" + std::string(s) + "'");
  return v;
}

std::uint64_t to_count(std::string_view s, std::size_t line) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    parse_fail(line, "expected a non-negative integer, got '" + std::string(s) + "'");
  }
  return v;
}

bool to_switch(std::string_view s, std::size_t line) {
  s = trim(s);
  if (s == "on" || s == "true" || s == "yes" || s == "1") return true;
  if (s == "off" || s == "false" || s == "no" || s == "0") return false;
  parse_fail(line, "expected on/off, got '" + std::string(s) + "'");
}

PriorSpec parse_prior(std::span<const std::string_view> w, std::size_t line) {
  if (w.size() == 3 && w[0] == "uniform") return PriorSpec::uniform(to_double(w[1], line), to_double(w[2], line));
  if (w.size() == 3 && w[0] == "normal") return PriorSpec::normal(to_double(w[1], line), to_double(w[2], line));
  parse_fail(line, "expected 'uniform a b' or 'normal mean sd'");
}

std::string prior_text(const PriorSpec& p) {
  if (p.family == PriorSpec::Family::uniform) {
    return "uniform " + format_double(p.parameters[0]) + " " + format_double(p.parameters[1]);
  }
  return "normal " + format_double(p.parameters[0]) + " " + format_double(p.parameters[1]);
}

std::optional<BiasScale> parse_scale(std::string_view s) {
  if (s == "logit") return BiasScale::logit;
  if (s == "log") return BiasScale::log;
  if (s == "identity") return BiasScale::identity;
  return std::nullopt;
}

std::optional<Likelihood> parse_family(std::string_view s) {
  if (s == "binomial") return Likelihood::binomial;
  if (s == "poisson") return Likelihood::poisson;
  if (s == "multinomial") return Likelihood::multinomial;
  return std::nullopt;
}

std::optional<RiskGroup> parse_cell(std::string_view s) {
  const auto dot = s.find('.');
  if (dot == std::string_view::npos) return std::nullopt;
  const auto gender = parse_gender(s.substr(0, dot));
  if (!gender) return std::nullopt;
  return parse_group(*gender, s.substr(dot + 1));
}

std::string read_file(const std::filesystem::path& path, ConfigError::Kind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(kind, "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view measure_name(Measure m) {
  switch (m) {
    case Measure::rho: return "rho";
    case Measure::pi: return "pi";
    case Measure::delta: return "delta";
    case Measure::undiagnosed: return "undiagnosed";
    case Measure::mixture: return "mixture";
    case Measure::mixture_delta: return "mixture-delta";
    case Measure::diagnosed: return "diagnosed";
    case Measure::split: return "split";
  }
  return "?";
}

std::optional<Measure> parse_measure(std::string_view s) {
  for (Measure m : {Measure::rho, Measure::pi, Measure::delta, Measure::undiagnosed, Measure::mixture,
                    Measure::mixture_delta, Measure::diagnosed, Measure::split}) {
    if (measure_name(m) == s) return m;
  }
  return std::nullopt;
}

Likelihood family_for(Measure m) {
  if (m == Measure::diagnosed) return Likelihood::poisson;
  if (m == Measure::split) return Likelihood::multinomial;
  return Likelihood::binomial;
}

std::string_view scale_name(BiasScale s) {
  switch (s) {
    case BiasScale::logit: return "logit";
    case BiasScale::log: return "log";
    case BiasScale::identity: return "identity";
  }
  return "?";
}

double factor_to_scale(double factor) { return std::log(factor) / 1.96; }

bool ModelConfig::has_group(RiskGroup g) const { return std::find(groups.begin(), groups.end(), g) != groups.end(); }

bool ModelConfig::has_region(Region r) const {
  return std::find(regions.begin(), regions.end(), r) != regions.end();
}

std::vector<DataRecord> parse_data_csv(std::string_view text, std::size_t first_line) {
  std::vector<DataRecord> out;
  std::size_t line_no = first_line;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    const std::size_t this_line = line_no++;
    if (line.empty() || line.front() == '#') continue;
    const auto cols = split(line, ',');
    if (cols.size() != 7) parse_fail(this_line, "expected 7 columns source,gender,group,region,family,x,n");
    if (cols[0] == "source" && cols[5] == "x") continue;  // header
    DataRecord r;
    r.source = cols[0];
    r.gender = cols[1];
    r.group = cols[2];
    r.region = cols[3];
    r.family = cols[4];
    r.x = to_count(cols[5], this_line);
    r.n = cols[6].empty() ? 0 : to_count(cols[6], this_line);
    r.line = this_line;
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_data_csv(std::span<const DataRecord> records) {
  std::string out = "source,gender,group,region,family,x,n\n";
  for (const auto& r : records) {
    out += r.source + "," + r.gender + "," + r.group + "," + r.region + "," + r.family + "," + std::to_string(r.x) +
           "," + std::to_string(r.n) + "\n";
  }
  return out;
}

ModelConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  ModelConfig cfg;
  cfg.base_dir = base_dir;
  std::string section;
  std::size_t line_no = 0;
  std::set<std::string> seen_sections;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') parse_fail(line_no, "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      static const std::set<std::string> known{"model", "populations", "hyperpriors", "groups",
                                               "sources", "data", "dynamics"};
      if (!known.contains(section)) parse_fail(line_no, "unknown section [" + section + "]");
      seen_sections.insert(section);
      continue;
    }
    if (section.empty()) parse_fail(line_no, "content before the first section");
    const auto eq = line.find('=');
    if (section == "data" && eq == std::string_view::npos) {
      auto rows = parse_data_csv(line, line_no);
      for (auto& r : rows) cfg.data.push_back(std::move(r));
      continue;
    }
    if (eq == std::string_view::npos) parse_fail(line_no, "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) parse_fail(line_no, "empty key");

    if (section == "model") {
      if (key == "year") {
        cfg.year = static_cast<int>(to_double(value, line_no));
      } else if (key == "hierarchy") {
        cfg.hierarchy = to_switch(value, line_no);
      } else if (key == "bias") {
        cfg.bias = to_switch(value, line_no);
      } else if (key == "regions") {
        cfg.regions.clear();
        for (auto part : split(value, ',')) {
          auto r = parse_region(part);
          if (!r) semantic_fail("line " + std::to_string(line_no) + ": unknown region '" + std::string(part) + "'");
          cfg.regions.push_back(*r);
        }
      } else if (key == "groups") {
        cfg.groups.clear();
        for (auto part : split(value, ',')) {
          auto g = parse_cell(part);
          if (!g) semantic_fail("line " + std::to_string(line_no) + ": unknown group '" + std::string(part) + "'");
          cfg.groups.push_back(*g);
        }
      } else {
        parse_fail(line_no, "unknown [model] key '" + key + "'");
      }
    } else if (section == "populations") {
      const auto dot = key.find('.');
      const auto gender = parse_gender(std::string_view(key).substr(0, dot));
      const auto region = dot == std::string::npos ? std::nullopt : parse_region(std::string_view(key).substr(dot + 1));
      if (!gender || !region) {
        semantic_fail("line " + std::to_string(line_no) + ": unknown population cell '" + key + "'");
      }
      cfg.population[index_of(*gender)][index_of(*region)] = to_double(value, line_no);
    } else if (section == "hyperpriors") {
      auto& h = cfg.hyper;
      if (key == "factor_pi_region") {
        h.factor_pi_region = to_double(value, line_no);
      } else if (key == "factor_delta_region") {
        h.factor_delta_region = to_double(value, line_no);
      } else if (key == "factor_pi_group") {
        h.factor_pi_group = to_double(value, line_no);
      } else if (key == "factor_delta_group") {
        h.factor_delta_group = to_double(value, line_no);
      } else if (key == "top_sd") {
        h.top_sd = to_double(value, line_no);
      } else if (key == "rho_concentration") {
        h.rho_concentration = to_double(value, line_no);
      } else if (key == "nu") {
        const auto w = words(value);
        h.nu = parse_prior(w, line_no);
      } else {
        parse_fail(line_no, "unknown [hyperpriors] key '" + key + "'");
      }
    } else if (section == "groups") {
      if (!key.starts_with("weight.")) parse_fail(line_no, "expected 'weight.<gender>.<group> = w'");
      const auto g = parse_cell(std::string_view(key).substr(7));
      if (!g) semantic_fail("line " + std::to_string(line_no) + ": unknown group '" + key.substr(7) + "'");
      cfg.survey_weight[index_of(*g)] = to_double(value, line_no);
    } else if (section == "sources") {
      SourceSpec src;
      src.name = key;
      const auto parts = split(value, ';');
      const auto m = parse_measure(parts[0]);
      if (!m) parse_fail(line_no, "unknown measure '" + std::string(parts[0]) + "'");
      src.measure = *m;
      if (parts.size() > 2) parse_fail(line_no, "expected 'measure' or 'measure; bias <scale> <prior>'");
      if (parts.size() == 2) {
        const auto w = words(parts[1]);
        if (w.size() != 5 || w[0] != "bias") parse_fail(line_no, "expected 'bias <scale> uniform|normal a b'");
        const auto scale = parse_scale(w[1]);
        if (!scale) parse_fail(line_no, "unknown bias scale '" + std::string(w[1]) + "'");
        src.bias = BiasSpec{*scale, parse_prior(std::span(w).subspan(2), line_no)};
      }
      cfg.sources[key] = std::move(src);
    } else if (section == "data") {
      if (key != "file") parse_fail(line_no, "unknown [data] key '" + key + "'");
      std::filesystem::path p{std::string(value)};
      if (p.is_relative()) p = base_dir / p;
      auto rows = parse_data_csv(read_file(p, ConfigError::Kind::parse));
      for (auto& r : rows) cfg.data.push_back(std::move(r));
      cfg.data_files.push_back(p);
    } else if (section == "dynamics") {
      cfg.dynamics[key] = std::string(value);
    }
  }
  return cfg;
}

ModelConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path, ConfigError::Kind::parse);
  return parse_config(text, path.parent_path());
}

std::string format_config(const ModelConfig& c) {
  std::ostringstream out;
  out << "[model]\nyear = " << c.year << "\nhierarchy = " << (c.hierarchy ? "on" : "off")
      << "\nbias = " << (c.bias ? "on" : "off") << "\nregions = ";
  for (std::size_t i = 0; i < c.regions.size(); ++i) out << (i ? ", " : "") << region_name(c.regions[i]);
  out << "\ngroups = ";
  for (std::size_t i = 0; i < c.groups.size(); ++i) out << (i ? ", " : "") << cell_name(c.groups[i]);
  out << "\n\n[populations]\n";
  for (Gender s : kGenders) {
    for (Region r : kAllRegions) {
      const double n = c.population[index_of(s)][index_of(r)];
      if (!(n > 0.0)) continue;
      out << gender_name(s) << "." << region_name(r) << " = ";
      if (n == std::floor(n) && n < 1e15) {
        out << static_cast<std::uint64_t>(n) << "\n";
      } else {
        out << format_double(n) << "\n";
      }
    }
  }
  const auto& h = c.hyper;
  out << "\n[hyperpriors]\nfactor_pi_region = " << format_double(h.factor_pi_region)
      << "\nfactor_delta_region = " << format_double(h.factor_delta_region)
      << "\nfactor_pi_group = " << format_double(h.factor_pi_group)
      << "\nfactor_delta_group = " << format_double(h.factor_delta_group)
      << "\ntop_sd = " << format_double(h.top_sd) << "\nrho_concentration = " << format_double(h.rho_concentration)
      << "\nnu = " << prior_text(h.nu) << "\n\n[groups]\n";
  for (RiskGroup g : kAllGroups) {
    if (c.survey_weight[index_of(g)] != 1.0) {
      out << "weight." << cell_name(g) << " = " << format_double(c.survey_weight[index_of(g)]) << "\n";
    }
  }
  out << "\n[sources]\n";
  for (const auto& [name, src] : c.sources) {
    out << name << " = " << measure_name(src.measure);
    if (src.bias) out << "; bias " << scale_name(src.bias->scale) << " " << prior_text(src.bias->prior);
    out << "\n";
  }
  if (!c.dynamics.empty()) {
    out << "\n[dynamics]\n";
    for (const auto& [k, v] : c.dynamics) out << k << " = " << v << "\n";
  }
  out << "\n[data]\n" << format_data_csv(c.data);
  return out.str();
}

std::vector<ResolvedRecord> resolve(const ModelConfig& c) {
  if (c.regions.empty()) semantic_fail("model has no regions");
  if (c.groups.empty()) semantic_fail("model has no groups");
  for (double w : c.survey_weight) {
    if (!(w > 0.0)) semantic_fail("survey weights must be positive");
  }
  for (double f : {c.hyper.factor_pi_region, c.hyper.factor_delta_region, c.hyper.factor_pi_group,
                   c.hyper.factor_delta_group}) {
    if (!(f > 1.0)) semantic_fail("hyper-prior factors must exceed 1");
  }
  if (!(c.hyper.top_sd > 0.0) || !(c.hyper.rho_concentration > 0.0)) {
    semantic_fail("top_sd and rho_concentration must be positive");
  }
  try {
    c.hyper.nu.validate();
    for (const auto& [name, src] : c.sources) {
      if (src.bias) src.bias->prior.validate();
    }
  } catch (const GraphError& e) {
    semantic_fail(e.what());
  }
  const auto nu = c.hyper.nu;
  if (nu.family == PriorSpec::Family::uniform && (nu.parameters[0] < 0.0 || nu.parameters[1] > 1.0)) {
    semantic_fail("nu prior must lie within [0, 1]");
  }

  std::vector<ResolvedRecord> out;
  for (const auto& rec : c.data) {
    const std::string where = "data line " + std::to_string(rec.line) + ": ";
    ResolvedRecord rr;
    rr.record = &rec;
    const auto src = c.sources.find(rec.source);
    if (src == c.sources.end()) semantic_fail(where + "unknown source '" + rec.source + "'");
    rr.source = &src->second;
    const auto gender = parse_gender(rec.gender);
    if (!gender) semantic_fail(where + "unknown gender '" + rec.gender + "'");
    rr.gender = *gender;
    const auto region = parse_region(rec.region);
    const std::string cell = rec.gender + "." + rec.group + "." + rec.region;
    if (!region) semantic_fail(where + "undefined cell " + cell + ": unknown region '" + rec.region + "'");
    rr.region = *region;
    if (!c.has_region(*region)) semantic_fail(where + "undefined cell " + cell + ": region not in model");
    rr.groups = expand_groups(*gender, rec.group);
    if (rr.groups.empty()) semantic_fail(where + "undefined cell " + cell + ": unknown group '" + rec.group + "'");
    for (RiskGroup g : rr.groups) {
      if (!c.has_group(g)) semantic_fail(where + "undefined cell " + cell + ": group not in model");
    }
    const auto family = parse_family(rec.family);
    if (!family) semantic_fail(where + "unknown likelihood family '" + rec.family + "'");
    rr.family = *family;
    if (*family != family_for(src->second.measure)) {
      semantic_fail(where + "source '" + rec.source + "' measures " + std::string(measure_name(src->second.measure)) +
                    ", which needs a " + std::string(likelihood_name(family_for(src->second.measure))) +
                    " likelihood");
    }
    if (*family == Likelihood::binomial) {
      if (rec.n < 1) semantic_fail(where + "binomial denominator must be at least 1");
      if (rec.x > rec.n) semantic_fail(where + "count exceeds denominator");
    }
    if (src->second.measure == Measure::diagnosed || src->second.measure == Measure::split) {
      if (!(c.population[index_of(*gender)][index_of(*region)] > 0.0) && src->second.measure == Measure::diagnosed) {
        semantic_fail(where + "no population given for " + rec.gender + "." + rec.region);
      }
      if (src->second.bias) semantic_fail(where + "diagnosed counts take their bias through nu, not a source bias");
    }
    out.push_back(std::move(rr));
  }
  return out;
}

PrevalenceParams reference_params() {
  PrevalenceParams p;
  p.year = 2008;
  // Adults aged 15-44.
  p.population = {{{650000.0, 900000.0, 9000000.0}, {640000.0, 900000.0, 8900000.0}}};
  struct Row {
    RiskGroup g;
    std::array<double, 3> rho, pi, delta;
  };
  // Non-LR rows; LR takes the remaining share of each gender.
  const Row rows[] = {
      {RiskGroup::msm_sti, {0.012, 0.006, 0.004}, {0.16, 0.10, 0.08}, {0.70, 0.70, 0.65}},
      {RiskGroup::msm_non_sti, {0.040, 0.022, 0.018}, {0.07, 0.05, 0.035}, {0.60, 0.55, 0.55}},
      {RiskGroup::msm_past, {0.010, 0.008, 0.008}, {0.03, 0.02, 0.015}, {0.75, 0.75, 0.70}},
      {RiskGroup::male_idu_current, {0.006, 0.004, 0.004}, {0.03, 0.012, 0.008}, {0.80, 0.80, 0.75}},
      {RiskGroup::male_idu_past, {0.010, 0.008, 0.008}, {0.02, 0.010, 0.006}, {0.85, 0.80, 0.80}},
      {RiskGroup::male_ssa, {0.040, 0.025, 0.005}, {0.030, 0.025, 0.030}, {0.60, 0.60, 0.55}},
      {RiskGroup::male_sti, {0.050, 0.040, 0.030}, {0.008, 0.004, 0.002}, {0.55, 0.50, 0.50}},
      {RiskGroup::female_idu_current, {0.003, 0.002, 0.002}, {0.025, 0.010, 0.006}, {0.85, 0.85, 0.80}},
      {RiskGroup::female_idu_past, {0.005, 0.004, 0.004}, {0.015, 0.008, 0.005}, {0.90, 0.85, 0.85}},
      {RiskGroup::female_ssa, {0.045, 0.030, 0.006}, {0.045, 0.040, 0.040}, {0.75, 0.72, 0.70}},
      {RiskGroup::female_sti, {0.060, 0.050, 0.040}, {0.006, 0.003, 0.0015}, {0.65, 0.60, 0.60}},
  };
  for (const auto& row : rows) {
    for (Region r : kAllRegions) {
      p.rho_at(row.g, r) = row.rho[index_of(r)];
      p.pi_at(row.g, r) = row.pi[index_of(r)];
      p.delta_at(row.g, r) = row.delta[index_of(r)];
    }
  }
  const std::array<double, 3> lr_pi_m{0.0008, 0.0005, 0.0002};
  const std::array<double, 3> lr_pi_f{0.0015, 0.0010, 0.0004};
  for (Region r : kAllRegions) {
    for (Gender s : kGenders) {
      const RiskGroup lr = s == Gender::male ? RiskGroup::male_lr : RiskGroup::female_lr;
      double used = 0.0;
      for (RiskGroup g : groups_of(s)) {
        if (g != lr) used += p.rho_at(g, r);
      }
      p.rho_at(lr, r) = 1.0 - used;
      p.pi_at(lr, r) = s == Gender::male ? lr_pi_m[index_of(r)] : lr_pi_f[index_of(r)];
      p.delta_at(lr, r) = s == Gender::male ? 0.45 : 0.55;
    }
  }
  return p;
}

BiasParams reference_bias() {
  BiasParams b;
  for (RiskGroup g : kAllGroups) b.nu_at(g) = 0.05;
  return b;
}

ModelConfig reference_config() {
  const PrevalenceParams p = reference_params();
  const BiasParams b = reference_bias();
  ModelConfig c;
  c.population = p.population;
  auto add_source = [&](const std::string& name, Measure m) { c.sources[name] = SourceSpec{name, m, std::nullopt}; };
  add_source("behavioural-survey", Measure::rho);
  add_source("ua-idu", Measure::pi);
  add_source("ua-idu-diagnosed", Measure::delta);
  add_source("ua-sti", Measure::undiagnosed);
  add_source("anc-ssa", Measure::pi);
  add_source("anc-ssa-diagnosed", Measure::delta);
  add_source("anc-nssa", Measure::mixture);
  add_source("anc-all", Measure::pi);
  add_source("diagnosed-total", Measure::diagnosed);
  add_source("diagnosed-split", Measure::split);

  std::size_t line = 0;
  auto sum = [&](const std::vector<RiskGroup>& gs, Region r, auto f) {
    double s = 0.0;
    for (RiskGroup g : gs) s += f(g, r);
    return s;
  };
  auto rho = [&](RiskGroup g, Region r) { return p.rho_at(g, r); };
  auto infected = [&](RiskGroup g, Region r) { return p.rho_at(g, r) * p.pi_at(g, r); };
  auto diagnosed = [&](RiskGroup g, Region r) { return p.rho_at(g, r) * p.pi_at(g, r) * p.delta_at(g, r); };
  auto reported = [&](RiskGroup g, Region r) { return (1.0 - b.nu_at(g)) * diagnosed(g, r); };
  auto weighted = [&](auto f) {
    return [&, f](RiskGroup g, Region r) { return c.survey_weight[index_of(g)] * f(g, r); };
  };
  auto binomial = [&](const std::string& source, Gender s, const std::string& group, Region r, double psi,
                      std::uint64_t n) {
    DataRecord rec{source, std::string(gender_name(s)), group, std::string(region_name(r)), "binomial",
                   static_cast<std::uint64_t>(std::llround(psi * static_cast<double>(n))), n, ++line};
    c.data.push_back(std::move(rec));
  };

  for (Region r : kAllRegions) {
    for (Gender s : kGenders) {
      const bool male = s == Gender::male;
      auto groups = [&](std::string_view expr) { return expand_groups(s, expr); };
      // Group sizes from the behavioural survey and population estimates.
      for (const char* g : male ? std::vector<const char*>{"MSM", "IDU", "SSA", "STI"}
                                : std::vector<const char*>{"IDU", "SSA", "STI"}) {
        binomial("behavioural-survey", s, g, r, sum(groups(g), r, rho), 20000);
      }
      // Unlinked anonymous surveys of injecting drug users.
      const auto idu = groups("IDU");
      binomial("ua-idu", s, "IDU", r, sum(idu, r, infected) / sum(idu, r, rho), 1500);
      binomial("ua-idu-diagnosed", s, "IDU", r, sum(idu, r, diagnosed) / sum(idu, r, infected), 60);
      // STI clinic surveys of undiagnosed infection.
      for (const char* g : male ? std::vector<const char*>{"MSM-STI", "STI"} : std::vector<const char*>{"STI"}) {
        const RiskGroup grp = groups(g).front();
        binomial("ua-sti", s, g, r, p.pi_at(grp, r) * (1.0 - p.delta_at(grp, r)), 4000);
      }
      if (!male) {
        const RiskGroup ssa = RiskGroup::female_ssa;
        binomial("anc-ssa", s, "SSA", r, p.pi_at(ssa, r), 8000);
        binomial("anc-ssa-diagnosed", s, "SSA", r, p.delta_at(ssa, r), 300);
        const auto nssa = groups("NSSA");
        binomial("anc-nssa", s, "NSSA", r, sum(nssa, r, weighted(infected)) / sum(nssa, r, weighted(rho)), 60000);
        binomial("anc-all", s, "ALL", r, sum(groups("ALL"), r, infected), 60000);
      }
      // Diagnosed totals and the split by group.
      const double mu = p.population_at(s, r) * sum(groups("ALL"), r, reported);
      const auto total = static_cast<std::uint64_t>(std::llround(mu));
      c.data.push_back({"diagnosed-total", std::string(gender_name(s)), "ALL", std::string(region_name(r)), "poisson",
                        total, 0, ++line});
      const std::vector<const char*> cats =
          male ? std::vector<const char*>{"MSM", "IDU", "SSA", "STI+LR"}
               : std::vector<const char*>{"IDU", "SSA", "STI+LR"};
      std::vector<std::uint64_t> counts;
      std::uint64_t assigned = 0;
      for (std::size_t i = 0; i < cats.size(); ++i) {
        const double share = sum(groups(cats[i]), r, reported) / sum(groups("ALL"), r, reported);
        counts.push_back(i + 1 == cats.size() ? total - assigned
                                              : static_cast<std::uint64_t>(std::llround(share * static_cast<double>(total))));
        assigned += counts.back();
      }
      for (std::size_t i = 0; i < cats.size(); ++i) {
        c.data.push_back({"diagnosed-split", std::string(gender_name(s)), cats[i], std::string(region_name(r)),
                          "multinomial", counts[i], total, ++line});
      }
    }
  }
  return c;
}

}  // namespace evsynth::prevalence
