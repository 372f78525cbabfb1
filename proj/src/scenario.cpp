#include "mpcs/scenario.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace mpcs {

namespace {

struct Node {
  int line = 0;
  std::vector<std::vector<double>> rows;  // bare numeric lines
  std::map<std::string, Node> blocks;
  std::map<std::string, std::pair<int, std::vector<std::string>>> keys;
};

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("line " + std::to_string(line) + ": " + msg);
}

std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string t;
  while (is >> t) out.push_back(t);
  return out;
}

bool parse_number(const std::string& t, double& out) {
  const char* begin = t.data();
  const char* end = begin + t.size();
  auto [p, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && p == end;
}

Node parse_tree(const std::string& text) {
  Node root;
  std::vector<Node*> stack{&root};
  std::istringstream is(text);
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    if (auto pos = raw.find('#'); pos != std::string::npos) raw.erase(pos);
    auto tokens = tokenize(raw);
    if (tokens.empty()) continue;
    if (tokens.size() == 1 && tokens[0] == "}") {
      if (stack.size() == 1) fail(line, "unmatched '}'");
      stack.pop_back();
      continue;
    }
    if (tokens.back() == "{") {
      if (tokens.size() != 2) fail(line, "block header must be 'name {'");
      Node& child = stack.back()->blocks[tokens[0]];
      child.line = line;
      stack.push_back(&child);
      continue;
    }
    double v;
    if (parse_number(tokens[0], v)) {
      std::vector<double> row;
      for (const auto& t : tokens) {
        double x;
        if (!parse_number(t, x)) fail(line, "malformed number '" + t + "'");
        row.push_back(x);
      }
      stack.back()->rows.push_back(std::move(row));
      continue;
    }
    stack.back()->keys[tokens[0]] = {line,
                                     std::vector<std::string>(tokens.begin() + 1, tokens.end())};
  }
  if (stack.size() != 1) fail(line, "unclosed block (missing '}')");
  return root;
}

Mat rows_to_matrix(const Node& node, const std::string& name) {
  if (node.rows.empty()) fail(node.line, name + " block has no rows");
  const size_t cols = node.rows.front().size();
  Mat M(node.rows.size(), cols);
  for (size_t r = 0; r < node.rows.size(); ++r) {
    if (node.rows[r].size() != cols) {
      fail(node.line, name + " rows have inconsistent lengths");
    }
    for (size_t c = 0; c < cols; ++c) M(r, c) = node.rows[r][c];
  }
  return M;
}

const Node* find_block(const Node& parent, const std::string& name) {
  auto it = parent.blocks.find(name);
  return it == parent.blocks.end() ? nullptr : &it->second;
}

const Node& require_block(const Node& parent, const std::string& name, int parent_line) {
  const Node* b = find_block(parent, name);
  if (!b) fail(parent_line == 0 ? 1 : parent_line, "missing required block '" + name + "'");
  return *b;
}

double key_as_double(const Node& n, const std::string& key, double fallback, bool* found = nullptr) {
  auto it = n.keys.find(key);
  if (it == n.keys.end()) {
    if (found) *found = false;
    return fallback;
  }
  if (found) *found = true;
  if (it->second.second.size() != 1) fail(it->second.first, key + " expects one value");
  double v;
  if (!parse_number(it->second.second[0], v)) {
    fail(it->second.first, "malformed number for " + key);
  }
  return v;
}

Vec key_as_vector(const Node& n, const std::string& key, int expect, int line_hint) {
  auto it = n.keys.find(key);
  if (it == n.keys.end()) fail(line_hint, "missing key '" + key + "'");
  const auto& [line, toks] = it->second;
  if (expect >= 0 && static_cast<int>(toks.size()) != expect) {
    fail(line, key + " expects " + std::to_string(expect) + " values");
  }
  Vec v(toks.size());
  for (size_t i = 0; i < toks.size(); ++i) {
    if (!parse_number(toks[i], v[i])) fail(line, "malformed number for " + key);
  }
  return v;
}

void check_symmetric(const Mat& M, const std::string& name, int line) {
  if (M.rows() != M.cols()) fail(line, name + " must be square");
  if ((M - M.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * (1.0 + M.cwiseAbs().maxCoeff())) {
    fail(line, name + " must be symmetric");
  }
}

void write_matrix(std::ostream& os, const std::string& name, const Mat& M,
                  const std::string& indent) {
  os << indent << name << " {\n";
  for (int r = 0; r < M.rows(); ++r) {
    os << indent << "  ";
    for (int c = 0; c < M.cols(); ++c) {
      if (c) os << ' ';
      os << M(r, c);
    }
    os << '\n';
  }
  os << indent << "}\n";
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& text) {
  const Node root = parse_tree(text);
  ScenarioConfig cfg;

  const Node& model = require_block(root, "model", 1);
  cfg.A = rows_to_matrix(require_block(model, "A", model.line), "A");
  cfg.B = rows_to_matrix(require_block(model, "B", model.line), "B");
  if (cfg.A.rows() != cfg.A.cols()) fail(model.line, "A must be square");
  if (cfg.B.rows() != cfg.A.rows()) fail(model.line, "B must have one row per state");
  const int n = static_cast<int>(cfg.A.rows());
  const int m = static_cast<int>(cfg.B.cols());

  cfg.sets = ConstraintSets::none();
  if (const Node* cons = find_block(root, "constraints")) {
    if (cons->keys.count("u_max")) {
      const Vec u = key_as_vector(*cons, "u_max", m, cons->line);
      try {
        cfg.sets.input = InputBox::symmetric(u);
      } catch (const std::exception& e) {
        fail(cons->keys.at("u_max").first, e.what());
      }
    }
    if (const Node* sb = find_block(*cons, "state_box")) {
      const Mat bounds = rows_to_matrix(*sb, "state_box");
      if (bounds.rows() != 2 || bounds.cols() != n) {
        fail(sb->line, "state_box needs two rows (lo, hi) with n columns");
      }
      try {
        cfg.sets.state = StateSet::box(bounds.row(0).transpose(), bounds.row(1).transpose());
      } catch (const std::exception& e) {
        fail(sb->line, e.what());
      }
    }
  }

  const Node& cost = require_block(root, "cost", 1);
  cfg.Q = rows_to_matrix(require_block(cost, "Q", cost.line), "Q");
  cfg.R = rows_to_matrix(require_block(cost, "R", cost.line), "R");
  check_symmetric(cfg.Q, "Q", cost.line);
  check_symmetric(cfg.R, "R", cost.line);
  if (cfg.Q.rows() != n) fail(cost.line, "Q must be n x n");
  if (cfg.R.rows() != m) fail(cost.line, "R must be m x m");
  if (const Node* p = find_block(cost, "P")) {
    Mat P = rows_to_matrix(*p, "P");
    check_symmetric(P, "P", p->line);
    if (P.rows() != n) fail(p->line, "P must be n x n");
    cfg.P = std::move(P);
  }

  const Node& ctrl = require_block(root, "controller", 1);
  auto kind_it = ctrl.keys.find("kind");
  if (kind_it == ctrl.keys.end()) fail(ctrl.line, "controller needs a 'kind'");
  if (kind_it->second.second.size() != 1) fail(kind_it->second.first, "kind expects one value");
  const std::string kind = kind_it->second.second[0];
  const int N = static_cast<int>(key_as_double(ctrl, "N", 1));
  const double delta = key_as_double(ctrl, "delta", 0.0);
  if (N < 1) fail(ctrl.line, "controller N must be >= 1");
  if (delta < 0) fail(ctrl.line, "controller delta must be >= 0");

  if (kind == "open-loop") {
    cfg.controller = Controller::open_loop();
  } else if (kind == "static-gain") {
    const Node* kb = find_block(ctrl, "K");
    if (!kb) fail(ctrl.line, "static-gain controller needs a K block");
    Mat K = rows_to_matrix(*kb, "K");
    if (K.rows() != m || K.cols() != n) fail(kb->line, "K must be m x n");
    cfg.controller = Controller::static_gain(std::move(K));
  } else if (kind == "mpc") {
    cfg.controller = Controller::mpc(N);
    if (cfg.P) cfg.controller.lt = TerminalWeight::quadratic(*cfg.P);
  } else if (kind == "mpcs") {
    MpcsConfig mc;
    mc.N = N;
    mc.delta = delta;
    auto rf_it = ctrl.keys.find("rf_mode");
    if (rf_it != ctrl.keys.end()) {
      const std::string mode = rf_it->second.second.empty() ? "" : rf_it->second.second[0];
      if (mode == "second-stage-constraint") {
        mc.rf_mode = RfMode::SecondStageConstraint;
      } else if (mode == "invariant-set") {
        mc.rf_mode = RfMode::InvariantSet;
      } else {
        fail(rf_it->second.first, "rf_mode must be second-stage-constraint or invariant-set");
      }
    }
    if (const Node* gb = find_block(ctrl, "grid_box")) {
      const Mat bounds = rows_to_matrix(*gb, "grid_box");
      if (bounds.rows() != 2 || bounds.cols() != n) {
        fail(gb->line, "grid_box needs two rows (lo, hi) with n columns");
      }
      mc.grid.lo = bounds.row(0).transpose();
      mc.grid.hi = bounds.row(1).transpose();
    }
    mc.grid.cells = static_cast<int>(key_as_double(ctrl, "grid_cells", mc.grid.cells));
    mc.grid.control_samples =
        static_cast<int>(key_as_double(ctrl, "control_samples", mc.grid.control_samples));
    if (mc.rf_mode == RfMode::InvariantSet && mc.grid.lo.size() == 0) {
      fail(ctrl.line, "invariant-set mode needs a grid_box block");
    }
    cfg.controller = Controller::mpcs_controller(std::move(mc));
  } else {
    fail(kind_it->second.first, "unknown controller kind '" + kind + "'");
  }
  cfg.controller.N = N;
  if (cfg.controller.kind == Controller::Kind::Mpcs) cfg.controller.mpcs.N = N;

  const Node& run = require_block(root, "run", 1);
  cfg.x0 = key_as_vector(run, "x0", n, run.line);
  cfg.steps = static_cast<int>(key_as_double(run, "steps", 100));
  if (cfg.steps < 0) fail(run.line, "steps must be nonnegative");
  if (auto it = run.keys.find("trace_out"); it != run.keys.end()) {
    if (it->second.second.size() != 1) fail(it->second.first, "trace_out expects one path");
    cfg.trace_out = it->second.second[0];
  }
  if (auto it = run.keys.find("cert_out"); it != run.keys.end()) {
    if (it->second.second.size() != 1) fail(it->second.first, "cert_out expects one path");
    cfg.cert_out = it->second.second[0];
  }
  if (auto it = run.keys.find("monitors"); it != run.keys.end()) {
    for (const std::string& t : it->second.second) {
      if (t == "thm1") {
        cfg.monitors.thm1 = true;
      } else if (t == "thm2") {
        cfg.monitors.thm2 = true;
      } else {
        fail(it->second.first, "unknown monitor '" + t + "'");
      }
    }
  }

  // Validate the numeric blocks eagerly so errors surface at parse time.
  try {
    cfg.make_model();
    cfg.make_cost();
    cfg.make_terminal();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(root.line == 0 ? 1 : root.line, e.what());
  }
  return cfg;
}

ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string serialize_scenario(const ScenarioConfig& cfg) {
  std::ostringstream os;
  os.precision(10);
  os << "model {\n";
  write_matrix(os, "A", cfg.A, "  ");
  write_matrix(os, "B", cfg.B, "  ");
  os << "}\n";

  const bool has_input = cfg.sets.input.is_bounded();
  const bool has_box = cfg.sets.state.kind == StateSet::Kind::Box;
  if (has_input || has_box) {
    os << "constraints {\n";
    if (has_input) {
      os << "  u_max";
      for (int i = 0; i < cfg.sets.input.u_max.size(); ++i) {
        os << ' ' << cfg.sets.input.u_max[i];
      }
      os << '\n';
    }
    if (has_box) {
      Mat bounds(2, cfg.sets.state.lo.size());
      bounds.row(0) = cfg.sets.state.lo.transpose();
      bounds.row(1) = cfg.sets.state.hi.transpose();
      write_matrix(os, "state_box", bounds, "  ");
    }
    os << "}\n";
  }

  os << "cost {\n";
  write_matrix(os, "Q", cfg.Q, "  ");
  write_matrix(os, "R", cfg.R, "  ");
  if (cfg.P) write_matrix(os, "P", *cfg.P, "  ");
  os << "}\n";

  os << "controller {\n";
  switch (cfg.controller.kind) {
    case Controller::Kind::OpenLoop:
      os << "  kind open-loop\n";
      break;
    case Controller::Kind::StaticGain:
      os << "  kind static-gain\n";
      write_matrix(os, "K", cfg.controller.K, "  ");
      break;
    case Controller::Kind::Mpc:
      os << "  kind mpc\n";
      break;
    case Controller::Kind::Mpcs:
      os << "  kind mpcs\n";
      break;
  }
  os << "  N " << cfg.controller.N << '\n';
  if (cfg.controller.kind == Controller::Kind::Mpcs) {
    const MpcsConfig& mc = cfg.controller.mpcs;
    os << "  delta " << mc.delta << '\n';
    os << "  rf_mode "
       << (mc.rf_mode == RfMode::InvariantSet ? "invariant-set" : "second-stage-constraint")
       << '\n';
    if (mc.grid.lo.size() > 0) {
      Mat bounds(2, mc.grid.lo.size());
      bounds.row(0) = mc.grid.lo.transpose();
      bounds.row(1) = mc.grid.hi.transpose();
      write_matrix(os, "grid_box", bounds, "  ");
      os << "  grid_cells " << mc.grid.cells << '\n';
      os << "  control_samples " << mc.grid.control_samples << '\n';
    }
  }
  os << "}\n";

  os << "run {\n  x0";
  for (int i = 0; i < cfg.x0.size(); ++i) os << ' ' << cfg.x0[i];
  os << "\n  steps " << cfg.steps << '\n';
  if (!cfg.trace_out.empty()) os << "  trace_out " << cfg.trace_out << '\n';
  if (!cfg.cert_out.empty()) os << "  cert_out " << cfg.cert_out << '\n';
  if (cfg.monitors.thm1 || cfg.monitors.thm2) {
    os << "  monitors";
    if (cfg.monitors.thm1) os << " thm1";
    if (cfg.monitors.thm2) os << " thm2";
    os << '\n';
  }
  os << "}\n";
  return os.str();
}

}  // namespace mpcs
