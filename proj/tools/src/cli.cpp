#include "evsynth/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "evsynth/diagnostics.hpp"
#include "evsynth/dynamics.hpp"
#include "evsynth/graph_io.hpp"
#include "evsynth/joint_model.hpp"
#include "evsynth/model_config.hpp"
#include "evsynth/prevalence_model.hpp"
#include "evsynth/sampler.hpp"
#include "evsynth/synthgen.hpp"

namespace evsynth::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Failure : std::runtime_error {
  Failure(int code, const std::string& message) : std::runtime_error(message), code(code) {}
  int code;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure(kIoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text) || !out.flush()) throw Failure(kIoError, "cannot write " + path.string());
}

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Failure(kIoError, "cannot create output directory " + dir.string());
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path absolute_of(const fs::path& p) { return p.empty() ? p : fs::absolute(p).lexically_normal(); }

bool is_joint(const prevalence::ModelConfig& c) { return !c.dynamics.empty(); }

prevalence::ModelConfig load_model_config(const Invocation& inv) {
  if (!fs::exists(inv.config)) throw Failure(kIoError, "config not found: " + inv.config.string());
  prevalence::ModelConfig config = prevalence::load_config(inv.config);
  if (!inv.data.empty()) {
    config.data.clear();
    for (const auto& path : inv.data) {
      auto rows = prevalence::parse_data_csv(read_text(path));
      config.data.insert(config.data.end(), rows.begin(), rows.end());
    }
  }
  return config;
}

std::optional<fs::path> dynamics_file(const prevalence::ModelConfig& c, std::string_view key,
                                      const std::optional<fs::path>& override_path) {
  if (override_path) return override_path;
  const auto it = c.dynamics.find(key);
  if (it == c.dynamics.end()) return std::nullopt;
  fs::path p = it->second;
  return p.is_relative() ? c.base_dir / p : p;
}

struct JointInputs {
  dynamics::JointSettings settings;
  std::vector<dynamics::PrevalenceDatum> prevalence;
  std::vector<dynamics::RateDatum> rates;
};

JointInputs load_joint(const prevalence::ModelConfig& config, const Invocation& inv) {
  JointInputs j;
  j.settings = dynamics::parse_joint_settings(config.dynamics);
  if (auto p = dynamics_file(config, "prevalence_file", inv.prevalence_data)) {
    j.prevalence = dynamics::parse_prevalence_csv(read_text(*p));
  }
  if (auto p = dynamics_file(config, "rate_file", inv.rate_data)) j.rates = dynamics::parse_rate_csv(read_text(*p));
  return j;
}

/// Yearly rho/pi/delta surveys of `n` and Poisson counts of uptake,
/// diagnosis and exit over `n / 10` person-years per interval.
JointInputs default_joint_design(const dynamics::JointSettings& s, std::uint64_t n) {
  JointInputs j;
  j.settings = s;
  for (std::size_t t = 1; t <= s.years; ++t) {
    for (auto m : {dynamics::PrevalenceMeasure::rho, dynamics::PrevalenceMeasure::pi, dynamics::PrevalenceMeasure::delta}) {
      j.prevalence.push_back({t, m, 0, n});
    }
  }
  for (std::size_t t = 1; t < s.years; ++t) {
    for (auto q : {dynamics::RateQuantity::uptake, dynamics::RateQuantity::diagnosis, dynamics::RateQuantity::exit}) {
      j.rates.push_back({t, q, 0, static_cast<double>(n) / 10.0});
    }
  }
  return j;
}

mcmc::SamplerConfig sampler_config(const Invocation& inv) {
  mcmc::SamplerConfig sc;
  sc.chains = inv.chains;
  sc.iterations = inv.iterations;
  sc.burn_in = inv.burn_in;
  sc.thin = inv.thin;
  sc.seed = inv.seed;
  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw Failure(kParseError, e.what());
  }
  return sc;
}

class Run {
 public:
  Run(const Invocation& inv, std::ostream& out, std::ostream& err) : inv_(inv), out_(out), err_(err) {}

  int check() {
    const auto config = load_model_config(inv_);
    if (is_joint(config)) {
      const auto j = load_joint(config, inv_);
      const auto model = dynamics::build_joint_graph(j.settings, j.prevalence, j.rates);
      report(model.graph);
      out_ << "years: " << j.settings.years << "\nintervals: " << j.settings.years - 1 << "\n";
      if (model.graph.data_nodes().empty()) err_ << "warning: prior-only model (no data)\n";
      return kOk;
    }
    const auto model = prevalence::build_prevalence_graph(config);
    report(model.graph);
    out_ << "theta parameters: " << model.theta_dimension() << "\ngroups: " << config.groups.size()
         << "\nregions: " << config.regions.size() << "\n";
    if (model.graph.data_nodes().empty()) err_ << "warning: prior-only model (no data)\n";
    return kOk;
  }

  int simulate() {
    const auto config = load_model_config(inv_);
    prepare_out_dir(inv_.out);
    if (is_joint(config)) {
      JointInputs j = load_joint(config, inv_);
      if (j.prevalence.empty() && j.rates.empty()) j = default_joint_design(j.settings, inv_.sample_size.value_or(10000));
      const auto model = dynamics::build_joint_graph(j.settings, j.prevalence, j.rates);
      auto design = synth::design_of(model.graph);
      if (inv_.sample_size) design = synth::uniform_design(model.graph, *inv_.sample_size);
      const auto truth = synth::sample_prior(model.graph, inv_.seed);
      const auto sim = synth::simulate_dataset(model.graph, truth, design, inv_.seed);
      for (std::size_t i = 0; i < j.prevalence.size(); ++i) {
        const DataItem& item = sim[i];
        j.prevalence[i].x = item.x;
        if (item.family == Likelihood::binomial) j.prevalence[i].n = item.n;
      }
      for (std::size_t i = 0; i < j.rates.size(); ++i) j.rates[i].x = sim[j.prevalence.size() + i].x;
      emit("truth.csv", synth::format_truth_csv(model.graph, truth));
      emit("prevalence.csv", dynamics::format_prevalence_csv(j.prevalence));
      emit("rates.csv", dynamics::format_rate_csv(j.rates));
      out_ << "simulated " << sim.size() << " data items over " << j.settings.years << " years\n";
      return kOk;
    }
    const auto model = prevalence::build_prevalence_graph(config);
    auto design = synth::design_of(model.graph);
    if (inv_.sample_size) design = synth::uniform_design(model.graph, *inv_.sample_size);
    const auto truth = synth::sample_prior(model.graph, inv_.seed);
    const auto sim = synth::simulate_dataset(model.graph, truth, design, inv_.seed);
    const auto records = model.records_with(sim);
    if (!std::isfinite(log_joint(model.graph.with_observations(sim), truth.values))) {
      err_ << "warning: simulated data have zero likelihood at the truth\n";
    }
    emit("truth.csv", synth::format_truth_csv(model.graph, truth));
    emit("data.csv", prevalence::format_data_csv(records));
    out_ << "simulated " << records.size() << " data rows\n";
    if (records.empty()) err_ << "warning: prior-only model (no data)\n";
    return kOk;
  }

  int fit() {
    const auto config = load_model_config(inv_);
    const auto sc = sampler_config(inv_);
    const auto model = prevalence::build_prevalence_graph(config);
    if (model.graph.data_nodes().empty()) err_ << "warning: prior-only model (no data)\n";
    prepare_out_dir(inv_.out);
    const auto chains = sample(model.graph, sc);
    write_fit_outputs(model.graph, chains, inv_.strips);
    return convergence_code(chains);
  }

  int fit_joint() {
    const auto config = load_model_config(inv_);
    if (!is_joint(config)) throw Failure(kSemanticError, "config has no [dynamics] section");
    const auto sc = sampler_config(inv_);
    const auto j = load_joint(config, inv_);
    const auto model = dynamics::build_joint_graph(j.settings, j.prevalence, j.rates);
    if (model.graph.data_nodes().empty()) err_ << "warning: prior-only model (no data)\n";
    prepare_out_dir(inv_.out);
    const auto chains = sample(model.graph, sc);
    std::vector<std::string> strips = inv_.strips;
    for (std::size_t t = 1; t < j.settings.years; ++t) {
      strips.push_back(model.graph.label(model.rate(dynamics::RateKind::incidence, t)));
      strips.push_back(model.graph.label(model.rate(dynamics::RateKind::diagnosis, t)));
    }
    write_fit_outputs(model.graph, chains, strips);
    emit("trajectory.csv", median_trajectory_csv(model, chains));
    emit("trajectory_quantiles.csv", trajectory_csv(model, chains));
    return convergence_code(chains);
  }

  const std::vector<std::string>& outputs() const { return outputs_; }

 private:
  void report(const ParameterGraph& g) {
    out_ << "nodes: " << g.size() << "\nbasic parameters: " << g.basic_nodes().size()
         << "\nfunctional parameters: " << g.functional_nodes().size() + g.derived_nodes().size()
         << "\nfree parameters: " << g.free_parameter_count() << "\ndata nodes: " << g.data_nodes().size() << "\n";
  }

  void emit(const std::string& name, const std::string& text) {
    write_text(inv_.out / name, text);
    outputs_.push_back(name);
  }

  std::vector<mcmc::ChainOutput> sample(const ParameterGraph& graph, const mcmc::SamplerConfig& sc) {
    try {
      return mcmc::run_chains(graph, sc);
    } catch (const mcmc::SamplerError& e) {
      switch (e.kind()) {
        case mcmc::SamplerError::Kind::initialization: throw Failure(kInitFailure, e.what());
        case mcmc::SamplerError::Kind::solver: throw Failure(kSolverFailure, e.what());
        case mcmc::SamplerError::Kind::no_free_parameters: throw Failure(kSemanticError, e.what());
      }
      throw;
    }
  }

  void write_fit_outputs(const ParameterGraph& graph, const std::vector<mcmc::ChainOutput>& chains,
                         const std::vector<std::string>& strips) {
    for (const auto& c : chains) emit("samples_chain" + std::to_string(c.chain + 1) + ".csv", mcmc::format_samples_csv(c));
    summaries_ = mcmc::summarize_all(chains);
    emit("summary.csv", mcmc::format_summary_csv(summaries_));
    emit("diagnostics.csv", mcmc::format_diagnostics_csv(summaries_, inv_.rhat_threshold));
    for (const auto& q : strips) {
      if (std::find(chains.front().quantities.begin(), chains.front().quantities.end(), q) ==
          chains.front().quantities.end()) {
        throw Failure(kSemanticError, "no monitored quantity '" + q + "' for a density strip");
      }
      emit("strip_" + q + ".csv", mcmc::format_strip_csv(mcmc::export_density_strip(chains, q, inv_.strip_bins)));
    }
    if (inv_.truth) emit("coverage.csv", coverage_csv(graph));
  }

  std::string coverage_csv(const ParameterGraph& graph) {
    const auto truth = synth::parse_truth_csv(read_text(*inv_.truth));
    std::map<std::string, double, std::less<>> value(truth.begin(), truth.end());
    std::string out = "quantity,truth,q025,q975,covered\n";
    std::size_t covered = 0, total = 0;
    for (const auto& s : summaries_) {
      const auto it = value.find(s.quantity);
      if (it == value.end() || !graph.find(s.quantity)) continue;
      const bool inside = it->second >= s.q025 && it->second <= s.q975;
      covered += inside;
      ++total;
      out += s.quantity + "," + format_double(it->second) + "," + format_double(s.q025) + "," + format_double(s.q975) +
             "," + (inside ? "1" : "0") + "\n";
    }
    out_ << "truth inside 95% interval: " << covered << " of " << total << "\n";
    return out;
  }

  std::string trajectory_csv(const dynamics::JointModel& model, const std::vector<mcmc::ChainOutput>& chains) {
    std::string out = "t,compartment,median,q025,q975\n";
    const char* names[] = {"e", "s", "u", "d"};
    for (std::size_t t = 0; t < model.states.size(); ++t) {
      for (std::size_t k = 0; k < 4; ++k) {
        auto draws = mcmc::pooled(chains, model.graph.label(model.states[t][k]));
        std::sort(draws.begin(), draws.end());
        out += std::to_string(t + 1) + "," + names[k] + "," + format_double(mcmc::quantile_sorted(draws, 0.5)) + "," +
               format_double(mcmc::quantile_sorted(draws, 0.025)) + "," +
               format_double(mcmc::quantile_sorted(draws, 0.975)) + "\n";
      }
    }
    return out;
  }

  std::string median_trajectory_csv(const dynamics::JointModel& model, const std::vector<mcmc::ChainOutput>& chains) {
    std::vector<dynamics::CompartmentState> medians;
    for (const auto& ids : model.states) {
      std::array<double, 4> v{};
      for (std::size_t k = 0; k < 4; ++k) {
        auto draws = mcmc::pooled(chains, model.graph.label(ids[k]));
        std::sort(draws.begin(), draws.end());
        v[k] = mcmc::quantile_sorted(draws, 0.5);
      }
      medians.push_back(dynamics::CompartmentState::from_array(v));
    }
    return dynamics::format_trajectory_csv(medians);
  }

  int convergence_code(const std::vector<mcmc::ChainOutput>& chains) {
    if (chains.size() < 2) {
      err_ << "warning: R-hat unavailable with a single chain\n";
      return kOk;
    }
    std::size_t bad = 0;
    for (const auto& s : summaries_) {
      if (std::isfinite(s.rhat) && !(s.rhat < inv_.rhat_threshold)) {
        if (bad++ < 5) err_ << "not converged: " << s.quantity << " R-hat " << s.rhat << "\n";
      }
    }
    if (bad) {
      err_ << bad << " monitored quantities with R-hat >= " << inv_.rhat_threshold << "\n";
      return kNotConverged;
    }
    out_ << "all monitored R-hat < " << inv_.rhat_threshold << "\n";
    return kOk;
  }

  const Invocation& inv_;
  std::ostream& out_;
  std::ostream& err_;
  std::vector<std::string> outputs_;
  std::vector<mcmc::PosteriorSummary> summaries_;
};

json path_json(const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); }

std::optional<fs::path> path_of(const json& j) {
  if (j.is_null()) return std::nullopt;
  return fs::path(j.get<std::string>());
}

}  // namespace

std::string manifest_json(const Invocation& inv, std::string_view started, std::string_view finished,
                          std::string_view status, int exit_code, const std::vector<std::string>& outputs) {
  json data = json::array();
  for (const auto& p : inv.data) data.push_back(p.string());
  json j = {
      {"command", inv.command},
      {"config", inv.config.string()},
      {"data", data},
      {"prevalence_data", path_json(inv.prevalence_data)},
      {"rate_data", path_json(inv.rate_data)},
      {"truth", path_json(inv.truth)},
      {"out", inv.out.string()},
      {"seed", inv.seed},
      {"chains", inv.chains},
      {"iterations", inv.iterations},
      {"burnin", inv.burn_in},
      {"thin", inv.thin},
      {"rhat_threshold", inv.rhat_threshold},
      {"strip_bins", inv.strip_bins},
      {"strips", inv.strips},
      {"sample_size", inv.sample_size ? json(*inv.sample_size) : json(nullptr)},
      {"version", std::string(kVersion)},
      {"started", std::string(started)},
      {"finished", finished.empty() ? json(nullptr) : json(std::string(finished))},
      {"status", std::string(status)},
      {"exit_code", exit_code},
      {"outputs", outputs},
  };
  return j.dump(2) + "\n";
}

Invocation parse_manifest(std::string_view text) {
  try {
    const json j = json::parse(text);
    Invocation inv;
    inv.command = j.at("command").get<std::string>();
    inv.config = j.at("config").get<std::string>();
    for (const auto& p : j.at("data")) inv.data.emplace_back(p.get<std::string>());
    inv.prevalence_data = path_of(j.at("prevalence_data"));
    inv.rate_data = path_of(j.at("rate_data"));
    inv.truth = path_of(j.at("truth"));
    inv.out = j.at("out").get<std::string>();
    inv.seed = j.at("seed").get<std::uint64_t>();
    inv.chains = j.at("chains").get<std::size_t>();
    inv.iterations = j.at("iterations").get<std::size_t>();
    inv.burn_in = j.at("burnin").get<std::size_t>();
    inv.thin = j.at("thin").get<std::size_t>();
    inv.rhat_threshold = j.at("rhat_threshold").get<double>();
    inv.strip_bins = j.at("strip_bins").get<std::size_t>();
    inv.strips = j.at("strips").get<std::vector<std::string>>();
    if (!j.at("sample_size").is_null()) inv.sample_size = j.at("sample_size").get<std::uint64_t>();
    return inv;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed manifest: ") + e.what());
  }
}

int execute(const Invocation& given, std::ostream& out, std::ostream& err) {
  Invocation inv = given;
  inv.config = absolute_of(inv.config);
  for (auto& p : inv.data) p = absolute_of(p);
  if (inv.prevalence_data) inv.prevalence_data = absolute_of(*inv.prevalence_data);
  if (inv.rate_data) inv.rate_data = absolute_of(*inv.rate_data);
  if (inv.truth) inv.truth = absolute_of(*inv.truth);
  if (!inv.out.empty()) inv.out = absolute_of(inv.out);

  const bool writes = inv.command != "check";
  const std::string started = utc_now();
  Run run(inv, out, err);
  int code = kOk;
  try {
    if (writes) {
      prepare_out_dir(inv.out);
      write_text(inv.out / "manifest.json", manifest_json(inv, started, "", "running", -1, {}));
    }
    if (inv.command == "check") {
      code = run.check();
    } else if (inv.command == "simulate") {
      code = run.simulate();
    } else if (inv.command == "fit") {
      code = run.fit();
    } else if (inv.command == "fit-joint") {
      code = run.fit_joint();
    } else {
      throw Failure(kParseError, "unknown command '" + inv.command + "'");
    }
  } catch (const Failure& e) {
    err << "error: " << e.what() << "\n";
    code = e.code;
  } catch (const prevalence::ConfigError& e) {
    err << "error: " << e.what() << "\n";
    code = e.kind() == prevalence::ConfigError::Kind::parse ? kParseError : kSemanticError;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    code = kParseError;
  } catch (const dynamics::SolverError& e) {
    err << "error: " << e.what() << "\n";
    code = kSolverFailure;
  } catch (const GraphError& e) {
    err << "error: " << e.what() << "\n";
    code = kSemanticError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    code = kSemanticError;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    code = kSemanticError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    code = kIoError;
  }
  if (writes && code != kIoError) {
    try {
      write_text(inv.out / "manifest.json",
                 manifest_json(inv, started, utc_now(), code == kOk || code == kNotConverged ? "complete" : "failed", code,
                               run.outputs()));
    } catch (const Failure& e) {
      err << "error: " << e.what() << "\n";
      return kIoError;
    }
  }
  return code;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian evidence synthesis of HIV prevalence and incidence", "evsynth"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Invocation inv;
  std::string manifest;
  std::string replay_out;
  std::uint64_t sample_size = 0;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("config", inv.config, "Model configuration file")->required();
  };
  auto add_out = [&](CLI::App* sub) { sub->add_option("-o,--out", inv.out, "Output directory")->required(); };
  auto add_sampler = [&](CLI::App* sub) {
    sub->add_option("--chains", inv.chains, "Independent chains")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--iterations", inv.iterations, "Iterations per chain, burn-in included")->capture_default_str();
    sub->add_option("--burnin", inv.burn_in, "Burn-in iterations (adaptation only)")->capture_default_str();
    sub->add_option("--thin", inv.thin, "Keep every thin-th post burn-in draw")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--seed", inv.seed, "Master seed; chain k uses a stream derived from it")->capture_default_str();
    sub->add_option("--rhat-threshold", inv.rhat_threshold, "Convergence threshold for exit code 4")->capture_default_str();
    sub->add_option("--strip", inv.strips, "Monitored quantity to export as a density strip (repeatable)");
    sub->add_option("--strip-bins", inv.strip_bins, "Bins per density strip")->capture_default_str()->check(CLI::Range(10, 100000));
    sub->add_option("--truth", inv.truth, "Ground-truth CSV; adds coverage.csv");
  };

  auto* check = app.add_subcommand("check", "Validate a config and report graph size");
  add_config(check);
  check->add_option("--data", inv.data, "Data CSV files replacing the config's data");

  auto* simulate = app.add_subcommand("simulate", "Draw a truth from the prior and simulate a dataset");
  add_config(simulate);
  add_out(simulate);
  simulate->add_option("--seed", inv.seed, "Seed")->capture_default_str();
  simulate->add_option("--n", sample_size, "Sample size for every binomial datum and split")->check(CLI::PositiveNumber);

  auto* fit = app.add_subcommand("fit", "Fit the prevalence model");
  add_config(fit);
  add_out(fit);
  fit->add_option("--data", inv.data, "Data CSV files replacing the config's data");
  add_sampler(fit);

  auto* fit_joint = app.add_subcommand("fit-joint", "Fit the joint prevalence and incidence model");
  add_config(fit_joint);
  add_out(fit_joint);
  fit_joint->add_option("--prevalence-data", inv.prevalence_data, "CSV t,measure,x,n");
  fit_joint->add_option("--rate-data", inv.rate_data, "CSV t,quantity,x,exposure");
  add_sampler(fit_joint);

  auto* replay = app.add_subcommand("replay", "Rerun the invocation recorded in a manifest");
  replay->add_option("manifest", manifest, "manifest.json of an earlier run")->required();
  replay->add_option("-o,--out", replay_out, "Output directory (default: the recorded one)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kParseError;
  }

  if (replay->parsed()) {
    std::string text;
    try {
      text = read_text(manifest);
    } catch (const Failure& e) {
      err << "error: " << e.what() << "\n";
      return kIoError;
    }
    Invocation recorded;
    try {
      recorded = parse_manifest(text);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kParseError;
    }
    if (!replay_out.empty()) recorded.out = replay_out;
    return execute(recorded, out, err);
  }
  for (auto* sub : {check, simulate, fit, fit_joint}) {
    if (sub->parsed()) inv.command = sub->get_name();
  }
  if (sample_size > 0) inv.sample_size = sample_size;
  return execute(inv, out, err);
}

}  // namespace evsynth::cli
