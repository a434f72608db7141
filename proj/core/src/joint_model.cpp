#include "evsynth/joint_model.hpp"

#include <charconv>
#include <sstream>

#include "evsynth/graph_io.hpp"

namespace evsynth::dynamics {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_number(std::string_view s, std::size_t line) {
  s = trim(s);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

/// Calls `row(columns, line)` for each non-empty, non-header row.
template <class F>
void for_each_row(std::string_view text, std::size_t columns, std::string_view first_header, F row) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = trim(text.substr(0, nl));
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string_view> cols;
    std::string_view rest = line;
    while (true) {
      const auto comma = rest.find(',');
      cols.push_back(trim(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (cols.size() != columns) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(columns) + " columns");
    }
    if (cols[0] == first_header) continue;
    row(cols, line_no);
  }
}

}  // namespace

std::string_view rate_label(RateKind k) {
  switch (k) {
    case RateKind::uptake: return "lambda_es";
    case RateKind::incidence: return "lambda_su";
    case RateKind::diagnosis: return "lambda_ud";
    case RateKind::exit: return "mu_out";
  }
  return "?";
}

JointSettings parse_joint_settings(const std::map<std::string, std::string, std::less<>>& section) {
  JointSettings s;
  for (const auto& [key, value] : section) {
    if (key == "prevalence_file" || key == "rate_file") continue;
    if (key == "c1_concentration") {
      std::istringstream in(value);
      for (double& a : s.c1_concentration) {
        if (!(in >> a)) throw ParseError("c1_concentration needs four numbers");
      }
      continue;
    }
    const double v = parse_number<double>(value, 0);
    if (key == "years") {
      if (v < 0.0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
        throw ParseError("years must be a non-negative integer");
      }
      s.years = static_cast<std::size_t>(v);
    } else if (key == "step") {
      s.step = v;
    } else if (key == "uptake_max") {
      s.uptake_max = v;
    } else if (key == "incidence_max") {
      s.incidence_max = v;
    } else if (key == "diagnosis_max") {
      s.diagnosis_max = v;
    } else if (key == "exit_max") {
      s.exit_max = v;
    } else {
      throw ParseError("unknown [dynamics] key '" + key + "'");
    }
  }
  return s;
}

JointModel build_joint_graph(const JointSettings& settings, std::span<const PrevalenceDatum> prevalence,
                             std::span<const RateDatum> rates) {
  const std::size_t T = settings.years;
  if (T < 2) throw std::invalid_argument("joint model requires T >= 2");
  JointModel m;
  m.settings = settings;
  GraphBuilder b;

  const auto c1 = b.add_simplex_block("c1", {"c1.e", "c1.s", "c1.u", "c1.d"},
                                      {settings.c1_concentration.begin(), settings.c1_concentration.end()}, "c1",
                                      {0.85, 0.1, 0.025, 0.025});
  std::copy(c1.begin(), c1.end(), m.c1.begin());

  const std::array<double, 4> upper{settings.uptake_max, settings.incidence_max, settings.diagnosis_max,
                                    settings.exit_max};
  std::vector<NodeId> inputs(c1.begin(), c1.end());
  for (std::size_t t = 1; t < T; ++t) {
    std::array<NodeId, 4> row{};
    for (std::size_t k = 0; k < 4; ++k) {
      const auto kind = static_cast<RateKind>(k);
      row[k] = b.add_basic(BasicParameterNode{std::string(rate_label(kind)) + "." + std::to_string(t),
                                              Support::positive_real, PriorSpec::uniform(0.0, upper[k]),
                                              0.1 * upper[k], std::string(rate_label(kind)), true});
      inputs.push_back(row[k]);
    }
    m.rates.push_back(row);
  }

  std::vector<std::string> outputs;
  for (std::size_t t = 1; t <= T; ++t) {
    for (const char* c : {"e", "s", "u", "d"}) outputs.push_back(std::string("state.") + c + "." + std::to_string(t));
  }
  const auto states =
      b.add_vector_function("trajectory", std::make_shared<TrajectoryFunction>(T, settings.step), inputs, outputs);
  for (std::size_t t = 0; t < T; ++t) {
    m.states.push_back({states[4 * t], states[4 * t + 1], states[4 * t + 2], states[4 * t + 3]});
  }

  auto year_functional = [&](PrevalenceMeasure measure, std::size_t t, bool monitored) {
    const std::string label = std::string(measure_name(measure)) + "." + std::to_string(t);
    if (auto id = b.find(label)) return *id;
    const auto& st = m.states[t - 1];
    const Expr s = ref(st[1]), u = ref(st[2]), d = ref(st[3]);
    Expr e;
    switch (measure) {
      case PrevalenceMeasure::rho: e = s + u + d; break;
      case PrevalenceMeasure::pi: e = (u + d) / (s + u + d); break;
      case PrevalenceMeasure::delta: e = d / (u + d); break;
      case PrevalenceMeasure::undiagnosed: e = u / (s + u + d); break;
      case PrevalenceMeasure::diagnosed: e = d; break;
    }
    return b.add_functional(FunctionalNode{label, e, ValueRange::probability, std::string(measure_name(measure)), monitored});
  };
  for (std::size_t t = 1; t <= T; ++t) {
    year_functional(PrevalenceMeasure::rho, t, true);
    year_functional(PrevalenceMeasure::pi, t, true);
    year_functional(PrevalenceMeasure::delta, t, true);
  }

  std::size_t k = 0;
  for (const auto& y : prevalence) {
    if (y.t < 1 || y.t > T) throw std::out_of_range("prevalence datum year " + std::to_string(y.t) + " outside 1.." + std::to_string(T));
    const NodeId target = year_functional(y.measure, y.t, false);
    DataItem item;
    if (y.measure == PrevalenceMeasure::diagnosed) {
      item.family = Likelihood::poisson;
      item.offset = static_cast<double>(y.n);
    } else {
      item.family = Likelihood::binomial;
      item.n = y.n;
    }
    item.x = y.x;
    item.source = "prevalence";
    m.prevalence_data.push_back(b.add_data(DataNode{
        "y." + std::string(measure_name(y.measure)) + "." + std::to_string(y.t) + "#" + std::to_string(++k),
        {target}, item, std::nullopt}));
  }
  k = 0;
  for (const auto& z : rates) {
    if (z.t < 1 || z.t >= T) throw std::out_of_range("rate datum interval " + std::to_string(z.t) + " outside 1.." + std::to_string(T - 1));
    RateKind kind = RateKind::diagnosis;
    switch (z.quantity) {
      case RateQuantity::uptake: kind = RateKind::uptake; break;
      case RateQuantity::diagnosis: kind = RateKind::diagnosis; break;
      case RateQuantity::exit: kind = RateKind::exit; break;
    }
    DataItem item;
    item.family = Likelihood::poisson;
    item.x = z.x;
    item.offset = z.exposure;
    item.source = std::string(rate_quantity_name(z.quantity));
    m.rate_data.push_back(b.add_data(DataNode{
        "z." + std::string(rate_quantity_name(z.quantity)) + "." + std::to_string(z.t) + "#" + std::to_string(++k),
        {m.rate(kind, z.t)}, item, std::nullopt}));
  }
  m.graph = std::move(b).freeze();
  return m;
}

std::vector<PrevalenceDatum> parse_prevalence_csv(std::string_view text) {
  std::vector<PrevalenceDatum> out;
  for_each_row(text, 4, "t", [&](const std::vector<std::string_view>& c, std::size_t line) {
    PrevalenceDatum y;
    y.t = parse_number<std::size_t>(c[0], line);
    try {
      y.measure = parse_measure(c[1]);
    } catch (const std::invalid_argument& e) {
      throw ParseError("line " + std::to_string(line) + ": " + e.what());
    }
    y.x = parse_number<std::uint64_t>(c[2], line);
    y.n = parse_number<std::uint64_t>(c[3], line);
    out.push_back(y);
  });
  return out;
}

std::string format_prevalence_csv(std::span<const PrevalenceDatum> data) {
  std::string out = "t,measure,x,n\n";
  for (const auto& y : data) {
    out += std::to_string(y.t) + "," + std::string(measure_name(y.measure)) + "," + std::to_string(y.x) + "," +
           std::to_string(y.n) + "\n";
  }
  return out;
}

std::vector<RateDatum> parse_rate_csv(std::string_view text) {
  std::vector<RateDatum> out;
  for_each_row(text, 4, "t", [&](const std::vector<std::string_view>& c, std::size_t line) {
    RateDatum z;
    z.t = parse_number<std::size_t>(c[0], line);
    try {
      z.quantity = parse_rate_quantity(c[1]);
    } catch (const std::invalid_argument& e) {
      throw ParseError("line " + std::to_string(line) + ": " + e.what());
    }
    z.x = parse_number<std::uint64_t>(c[2], line);
    z.exposure = parse_number<double>(c[3], line);
    if (!(z.exposure > 0.0)) throw ParseError("line " + std::to_string(line) + ": exposure must be positive");
    out.push_back(z);
  });
  return out;
}

std::string format_rate_csv(std::span<const RateDatum> data) {
  std::string out = "t,quantity,x,exposure\n";
  for (const auto& z : data) {
    out += std::to_string(z.t) + "," + std::string(rate_quantity_name(z.quantity)) + "," + std::to_string(z.x) + "," +
           format_double(z.exposure) + "\n";
  }
  return out;
}

std::string format_trajectory_csv(std::span<const CompartmentState> states) {
  std::string out = "t,e,s,u,d\n";
  for (std::size_t t = 0; t < states.size(); ++t) {
    const auto& c = states[t];
    out += std::to_string(t + 1) + "," + format_double(c.e) + "," + format_double(c.s) + "," + format_double(c.u) +
           "," + format_double(c.d) + "\n";
  }
  return out;
}

}  // namespace evsynth::dynamics
