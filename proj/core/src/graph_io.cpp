#include "evsynth/graph_io.hpp"

#include <charconv>
#include <sstream>
#include <utility>
#include <vector>

namespace evsynth {

void VectorFunctionRegistry::add(std::string kind, Factory factory) {
  factories_[std::move(kind)] = std::move(factory);
}

std::shared_ptr<const VectorFunction> VectorFunctionRegistry::make(std::string_view kind,
                                                                   std::span<const double> parameters) const {
  auto it = factories_.find(kind);
  if (it == factories_.end()) throw ParseError("unknown vector-function kind '" + std::string(kind) + "'");
  return it->second(parameters);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

namespace {

// ---------------------------------------------------------------------------
// Writer

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

void write_expr(std::ostringstream& os, const ParameterGraph& g, const Expr& e) {
  switch (e.op) {
    case Op::constant:
      os << format_double(e.value);
      return;
    case Op::ref:
      os << "(ref " << quote(g.label(e.node)) << ")";
      return;
    default:
      break;
  }
  os << "(" << op_name(e.op);
  if (e.op == Op::weighted_mixture) {
    os << " (weights";
    for (double w : e.weights) os << " " << format_double(w);
    os << ")";
  }
  if (e.op == Op::normalized_share) os << " " << e.share_index;
  for (const auto& a : e.args) {
    os << " ";
    write_expr(os, g, a);
  }
  os << ")";
}

void write_prior(std::ostringstream& os, const ParameterGraph& g, const PriorSpec& p) {
  const auto& a = p.parameters;
  switch (p.family) {
    case PriorSpec::Family::uniform:
      os << "(uniform " << format_double(a[0]) << " " << format_double(a[1]) << ")";
      break;
    case PriorSpec::Family::normal:
      os << "(normal " << format_double(a[0]) << " " << format_double(a[1]) << ")";
      break;
    case PriorSpec::Family::half_normal:
      os << "(half-normal " << format_double(a[0]) << ")";
      break;
    case PriorSpec::Family::hierarchical_normal:
      os << "(hierarchical-normal " << quote(g.label(p.mean_parent)) << " " << quote(g.label(p.sd_parent)) << ")";
      break;
    case PriorSpec::Family::dirichlet:
      os << "dirichlet";
      break;
  }
}

// ---------------------------------------------------------------------------
// Reader

struct Sexp {
  enum class Kind { atom, string, list } kind = Kind::atom;
  std::string text;
  std::vector<Sexp> items;

  bool is_list() const { return kind == Kind::list; }
  const std::string& head() const {
    if (!is_list() || items.empty() || items[0].kind != Kind::atom) throw ParseError("expected (head ...) form");
    return items[0].text;
  }
};

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  Sexp read() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Sexp list;
      list.kind = Sexp::Kind::list;
      for (;;) {
        skip_space();
        if (pos_ >= text_.size()) throw ParseError("unterminated list");
        if (text_[pos_] == ')') {
          ++pos_;
          return list;
        }
        list.items.push_back(read());
      }
    }
    if (c == ')') throw ParseError("unexpected ')' at offset " + std::to_string(pos_));
    if (c == '"') {
      ++pos_;
      Sexp s;
      s.kind = Sexp::Kind::string;
      while (pos_ < text_.size() && text_[pos_] != '"') {
        if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) ++pos_;
        s.text += text_[pos_++];
      }
      if (pos_ >= text_.size()) throw ParseError("unterminated string");
      ++pos_;
      return s;
    }
    Sexp atom;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != '(' &&
           text_[pos_] != ')') {
      atom.text += text_[pos_++];
    }
    return atom;
  }

  bool at_end() {
    skip_space();
    return pos_ >= text_.size();
  }

 private:
  void skip_space() {
    while (pos_ < text_.size()) {
      if (std::isspace(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
      } else if (text_[pos_] == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

double to_double(const Sexp& s) {
  if (s.kind != Sexp::Kind::atom) throw ParseError("expected number");
  double v = 0.0;
  const char* first = s.text.data();
  const char* last = first + s.text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) throw ParseError("malformed number '" + s.text + "'");
  return v;
}

std::uint64_t to_count(const Sexp& s) {
  if (s.kind != Sexp::Kind::atom) throw ParseError("expected count");
  std::uint64_t v = 0;
  const char* first = s.text.data();
  const char* last = first + s.text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) throw ParseError("malformed count '" + s.text + "'");
  return v;
}

const std::string& to_string(const Sexp& s) {
  if (s.kind != Sexp::Kind::string) throw ParseError("expected quoted string");
  return s.text;
}

// Returns the (key ...) sub-form of a declaration, or nullptr.
const Sexp* field(const Sexp& form, std::string_view key) {
  for (std::size_t i = 1; i < form.items.size(); ++i) {
    const auto& item = form.items[i];
    if (item.is_list() && !item.items.empty() && item.items[0].kind == Sexp::Kind::atom && item.items[0].text == key) {
      return &item;
    }
  }
  return nullptr;
}

const Sexp& require(const Sexp& form, std::string_view key) {
  if (const Sexp* f = field(form, key)) return *f;
  throw ParseError("missing (" + std::string(key) + " ...) field");
}

class GraphReader {
 public:
  GraphReader(GraphBuilder& b, const VectorFunctionRegistry& reg) : builder_(b), registry_(reg) {}

  NodeId lookup(const Sexp& s) const {
    const auto& label = to_string(s);
    if (auto id = builder_.find(label)) return *id;
    throw ParseError("unknown parent '" + label + "'");
  }

  Expr expr(const Sexp& s) const {
    if (s.kind == Sexp::Kind::atom) return constant(to_double(s));
    const auto& h = s.head();
    if (h == "ref") return ref(lookup(s.items.at(1)));
    auto args_from = [&](std::size_t start) {
      std::vector<Expr> args;
      for (std::size_t i = start; i < s.items.size(); ++i) args.push_back(expr(s.items[i]));
      return args;
    };
    if (h == "add" || h == "mul") {
      Expr e;
      e.op = h == "add" ? Op::add : Op::multiply;
      e.args = args_from(1);
      return e;
    }
    if (h == "sub" || h == "div") {
      auto args = args_from(1);
      if (args.size() != 2) throw ParseError(h + " takes two arguments");
      return h == "sub" ? args[0] - args[1] : args[0] / args[1];
    }
    if (h == "logit" || h == "expit" || h == "log" || h == "exp") {
      auto args = args_from(1);
      if (args.size() != 1) throw ParseError(h + " takes one argument");
      if (h == "logit") return logit(std::move(args[0]));
      if (h == "expit") return expit(std::move(args[0]));
      if (h == "log") return evsynth::log(std::move(args[0]));
      return evsynth::exp(std::move(args[0]));
    }
    if (h == "mixture") {
      const Sexp& w = s.items.at(1);
      if (w.head() != "weights") throw ParseError("mixture requires (weights ...)");
      std::vector<double> weights;
      for (std::size_t i = 1; i < w.items.size(); ++i) weights.push_back(to_double(w.items[i]));
      auto args = args_from(2);
      if (args.size() != 2 * weights.size()) throw ParseError("mixture argument count");
      std::vector<Expr> shares, values;
      for (std::size_t i = 0; i < weights.size(); ++i) {
        shares.push_back(std::move(args[2 * i]));
        values.push_back(std::move(args[2 * i + 1]));
      }
      return weighted_mixture(std::move(weights), std::move(shares), std::move(values));
    }
    if (h == "share") {
      const auto index = static_cast<std::size_t>(to_count(s.items.at(1)));
      return normalized_share(index, args_from(2));
    }
    throw ParseError("unknown expression operator '" + h + "'");
  }

  PriorSpec prior(const Sexp& s) const {
    if (s.kind == Sexp::Kind::atom) throw ParseError("unexpected prior '" + s.text + "'");
    const auto& h = s.head();
    if (h == "uniform") return PriorSpec::uniform(to_double(s.items.at(1)), to_double(s.items.at(2)));
    if (h == "normal") return PriorSpec::normal(to_double(s.items.at(1)), to_double(s.items.at(2)));
    if (h == "half-normal") return PriorSpec::half_normal(to_double(s.items.at(1)));
    if (h == "hierarchical-normal") {
      return PriorSpec::hierarchical_normal(lookup(s.items.at(1)), lookup(s.items.at(2)));
    }
    throw ParseError("unknown prior family '" + h + "'");
  }

  static Support support(const std::string& s) {
    for (Support v : {Support::unit_interval, Support::positive_real, Support::real, Support::simplex_component}) {
      if (support_name(v) == s) return v;
    }
    throw ParseError("unknown support '" + s + "'");
  }

  static ValueRange range(const std::string& s) {
    for (ValueRange v : {ValueRange::probability, ValueRange::non_negative, ValueRange::real}) {
      if (range_name(v) == s) return v;
    }
    throw ParseError("unknown range '" + s + "'");
  }

  static std::string optional_string(const Sexp& form, std::string_view key) {
    const Sexp* f = field(form, key);
    return f ? to_string(f->items.at(1)) : std::string{};
  }

  static bool flag(const Sexp& form, std::string_view key, bool fallback) {
    const Sexp* f = field(form, key);
    return f ? to_double(f->items.at(1)) != 0.0 : fallback;
  }

  void declaration(const Sexp& form) {
    const auto& h = form.head();
    if (h == "basic") {
      BasicParameterNode node;
      node.label = to_string(form.items.at(1));
      node.support = support(require(form, "support").items.at(1).text);
      node.prior = prior(require(form, "prior").items.at(1));
      node.initial = to_double(require(form, "initial").items.at(1));
      node.role = optional_string(form, "role");
      node.monitored = flag(form, "monitor", true);
      builder_.add_basic(std::move(node));
    } else if (h == "simplex") {
      const std::string label = to_string(form.items.at(1));
      std::vector<std::string> labels;
      std::vector<double> conc, init;
      const Sexp& members = require(form, "members");
      for (std::size_t i = 1; i < members.items.size(); ++i) {
        const Sexp& m = members.items[i];
        if (!m.is_list() || m.items.size() != 3) throw ParseError("simplex member must be (label alpha initial)");
        labels.push_back(to_string(m.items[0]));
        conc.push_back(to_double(m.items[1]));
        init.push_back(to_double(m.items[2]));
      }
      builder_.add_simplex_block(label, std::move(labels), std::move(conc), optional_string(form, "role"),
                                 std::move(init));
    } else if (h == "functional") {
      FunctionalNode node;
      node.label = to_string(form.items.at(1));
      node.range = range(require(form, "range").items.at(1).text);
      node.role = optional_string(form, "role");
      node.monitored = flag(form, "monitor", false);
      node.expression = expr(require(form, "expr").items.at(1));
      builder_.add_functional(std::move(node));
    } else if (h == "vector-function") {
      const std::string label = to_string(form.items.at(1));
      const std::string kind = to_string(require(form, "kind").items.at(1));
      std::vector<double> params;
      const Sexp& p = require(form, "parameters");
      for (std::size_t i = 1; i < p.items.size(); ++i) params.push_back(to_double(p.items[i]));
      std::vector<NodeId> inputs;
      const Sexp& in = require(form, "inputs");
      for (std::size_t i = 1; i < in.items.size(); ++i) inputs.push_back(lookup(in.items[i]));
      std::vector<std::string> outputs;
      const Sexp& out = require(form, "outputs");
      for (std::size_t i = 1; i < out.items.size(); ++i) outputs.push_back(to_string(out.items[i]));
      builder_.add_vector_function(label, registry_.make(kind, params), std::move(inputs), std::move(outputs),
                                   flag(form, "monitor", true));
    } else if (h == "data") {
      DataNode node;
      node.label = to_string(form.items.at(1));
      const Sexp& t = require(form, "targets");
      for (std::size_t i = 1; i < t.items.size(); ++i) node.targets.push_back(lookup(t.items[i]));
      auto& obs = node.observation;
      obs.source = optional_string(form, "source");
      if (const Sexp* b = field(form, "binomial")) {
        obs.family = Likelihood::binomial;
        obs.x = to_count(b->items.at(1));
        obs.n = to_count(b->items.at(2));
      } else if (const Sexp* p = field(form, "poisson")) {
        obs.family = Likelihood::poisson;
        obs.x = to_count(p->items.at(1));
        obs.offset = to_double(require(*p, "offset").items.at(1));
      } else if (const Sexp* m = field(form, "multinomial")) {
        obs.family = Likelihood::multinomial;
        const Sexp& c = require(*m, "counts");
        for (std::size_t i = 1; i < c.items.size(); ++i) obs.counts.push_back(to_count(c.items[i]));
      } else {
        throw ParseError("data node '" + node.label + "' has no likelihood");
      }
      if (const Sexp* tf = field(form, "total-from")) node.total_from = lookup(tf->items.at(1));
      builder_.add_data(std::move(node));
    } else {
      throw ParseError("unknown declaration '" + h + "'");
    }
  }

 private:
  GraphBuilder& builder_;
  const VectorFunctionRegistry& registry_;
};

}  // namespace

std::string serialize_graph(const ParameterGraph& g) {
  std::ostringstream os;
  os << "(graph\n";
  for (const auto& decl : g.declarations()) {
    using K = ParameterGraph::Declaration::Kind;
    switch (decl.kind) {
      case K::basic: {
        const NodeId id{decl.index};
        const auto& n = g.basic(id);
        os << "  (basic " << quote(n.label) << " (support " << support_name(n.support) << ") (prior ";
        write_prior(os, g, n.prior);
        os << ") (initial " << format_double(n.initial) << ") (role " << quote(n.role) << ") (monitor "
           << (n.monitored ? 1 : 0) << "))\n";
        break;
      }
      case K::simplex: {
        const auto& b = g.simplex_blocks()[decl.index];
        os << "  (simplex " << quote(b.label) << " (role " << quote(b.role) << ")\n    (members";
        for (std::size_t i = 0; i < b.members.size(); ++i) {
          os << "\n      (" << quote(g.label(b.members[i])) << " " << format_double(b.concentration[i]) << " "
             << format_double(g.basic(b.members[i]).initial) << ")";
        }
        os << "))\n";
        break;
      }
      case K::functional: {
        const NodeId id{decl.index};
        const auto& f = g.functional(id);
        os << "  (functional " << quote(f.label) << " (range " << range_name(f.range) << ") (role " << quote(f.role)
           << ") (monitor " << (f.monitored ? 1 : 0) << ")\n    (expr ";
        write_expr(os, g, f.expression);
        os << "))\n";
        break;
      }
      case K::vector_function: {
        const auto& vf = g.vector_functions()[decl.index];
        os << "  (vector-function " << quote(vf.label) << " (kind " << quote(vf.function->kind()) << ")\n    (parameters";
        for (double p : vf.function->parameters()) os << " " << format_double(p);
        os << ")\n    (inputs";
        for (NodeId in : vf.inputs) os << " " << quote(g.label(in));
        os << ")\n    (outputs";
        for (NodeId out : vf.outputs) os << " " << quote(g.label(out));
        os << ")\n    (monitor " << (vf.monitored ? 1 : 0) << "))\n";
        break;
      }
      case K::data: {
        const NodeId id{decl.index};
        const auto& d = g.data(id);
        os << "  (data " << quote(d.label) << " (targets";
        for (NodeId t : d.targets) os << " " << quote(g.label(t));
        os << ") ";
        const auto& obs = d.observation;
        switch (obs.family) {
          case Likelihood::binomial:
            os << "(binomial " << obs.x << " " << obs.n << ")";
            break;
          case Likelihood::poisson:
            os << "(poisson " << obs.x << " (offset " << format_double(obs.offset) << "))";
            break;
          case Likelihood::multinomial:
            os << "(multinomial (counts";
            for (auto c : obs.counts) os << " " << c;
            os << "))";
            break;
        }
        if (d.total_from) os << " (total-from " << quote(g.label(*d.total_from)) << ")";
        os << " (source " << quote(obs.source) << "))\n";
        break;
      }
    }
  }
  os << ")\n";
  return os.str();
}

ParameterGraph parse_graph(std::string_view text, const VectorFunctionRegistry& registry) {
  Reader reader(text);
  const Sexp doc = reader.read();
  if (!reader.at_end()) throw ParseError("trailing content after (graph ...)");
  if (doc.head() != "graph") throw ParseError("document must start with (graph ...)");
  GraphBuilder builder;
  GraphReader gr(builder, registry);
  for (std::size_t i = 1; i < doc.items.size(); ++i) {
    try {
      gr.declaration(doc.items[i]);
    } catch (const GraphError& e) {
      throw ParseError(e.what());
    } catch (const std::out_of_range&) {
      throw ParseError("malformed declaration #" + std::to_string(i));
    }
  }
  return std::move(builder).freeze();
}

}  // namespace evsynth
