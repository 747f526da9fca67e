#include "symmfg/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "symmfg/sim.hpp"

namespace symmfg {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

struct HeaderFields {
  std::size_t horizon = 0, states = 0, actions = 0;
  double tau = 0.0;
};

// Parses "# key=value ..." metadata lines.
HeaderFields parse_header(std::istringstream& in, const std::string& magic) {
  std::string line;
  if (!std::getline(in, line) || line != "# " + magic)
    throw std::runtime_error("bad header: expected '# " + magic + "'");
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
    throw std::runtime_error("bad header: missing metadata line");
  HeaderFields f;
  std::istringstream meta(line.substr(2));
  std::string token;
  while (meta >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "horizon") f.horizon = std::stoul(value);
    else if (key == "states") f.states = std::stoul(value);
    else if (key == "actions") f.actions = std::stoul(value);
    else if (key == "tau") f.tau = std::stod(value);
  }
  return f;
}

void skip_column_line(std::istringstream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("bad table: missing column header");
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string policy_to_text(const Policy& pi) {
  std::ostringstream out;
  out << "# symmfg-policy v1\n";
  out << "# horizon=" << pi.horizon() << " states=" << pi.n_states()
      << " actions=" << pi.n_actions() << "\n";
  out << "step\tstate\taction\tvalue\n";
  for (std::size_t h = 0; h < pi.horizon(); ++h)
    for (std::size_t s = 0; s < pi.n_states(); ++s)
      for (std::size_t a = 0; a < pi.n_actions(); ++a)
        out << h << '\t' << s << '\t' << a << '\t' << format_double(pi.at(h, s, a)) << '\n';
  return out.str();
}

Policy policy_from_text(const std::string& text) {
  std::istringstream in(text);
  const HeaderFields f = parse_header(in, "symmfg-policy v1");
  skip_column_line(in);
  std::vector<double> table(f.horizon * f.states * f.actions, 0.0);
  std::size_t h, s, a;
  double v;
  std::size_t rows = 0;
  while (in >> h >> s >> a >> v) {
    if (h >= f.horizon || s >= f.states || a >= f.actions)
      throw std::runtime_error("policy table: index out of range");
    table[(h * f.states + s) * f.actions + a] = v;
    ++rows;
  }
  if (rows != table.size()) throw std::runtime_error("policy table: wrong row count");
  return {f.horizon, f.states, f.actions, std::move(table)};
}

void save_policy(const Policy& pi, const std::string& path) {
  write_file(path, policy_to_text(pi));
}

Policy load_policy(const std::string& path) { return policy_from_text(read_file(path)); }

std::string policy_profile_to_text(std::span<const Policy> policies) {
  std::ostringstream out;
  out << "# symmfg-policy-profile v1\n";
  out << "# agents=" << policies.size() << " horizon=" << policies[0].horizon()
      << " states=" << policies[0].n_states() << " actions=" << policies[0].n_actions() << "\n";
  out << "agent\tstep\tstate\taction\tvalue\n";
  for (std::size_t i = 0; i < policies.size(); ++i) {
    const Policy& pi = policies[i];
    for (std::size_t h = 0; h < pi.horizon(); ++h)
      for (std::size_t s = 0; s < pi.n_states(); ++s)
        for (std::size_t a = 0; a < pi.n_actions(); ++a)
          out << i << '\t' << h << '\t' << s << '\t' << a << '\t'
              << format_double(pi.at(h, s, a)) << '\n';
  }
  return out.str();
}

std::vector<Policy> policy_profile_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "# symmfg-policy-profile v1")
    throw std::runtime_error("bad header: expected policy profile");
  std::size_t agents = 0, horizon = 0, states = 0, actions = 0;
  if (!std::getline(in, line)) throw std::runtime_error("bad header");
  std::istringstream meta(line.substr(2));
  std::string token;
  while (meta >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    const auto key = token.substr(0, eq);
    const auto value = token.substr(eq + 1);
    if (key == "agents") agents = std::stoul(value);
    else if (key == "horizon") horizon = std::stoul(value);
    else if (key == "states") states = std::stoul(value);
    else if (key == "actions") actions = std::stoul(value);
  }
  skip_column_line(in);
  std::vector<std::vector<double>> tables(agents,
                                          std::vector<double>(horizon * states * actions, 0.0));
  std::size_t i, h, s, a;
  double v;
  while (in >> i >> h >> s >> a >> v) {
    if (i >= agents) throw std::runtime_error("policy profile: agent out of range");
    tables[i][(h * states + s) * actions + a] = v;
  }
  std::vector<Policy> out;
  out.reserve(agents);
  for (auto& t : tables) out.emplace_back(horizon, states, actions, std::move(t));
  return out;
}

std::string qtable_to_text(const QTable& q) {
  std::ostringstream out;
  out << "# symmfg-qtable v1\n";
  out << "# horizon=" << q.horizon() << " states=" << q.n_states()
      << " actions=" << q.n_actions() << " tau=" << format_double(q.tau()) << "\n";
  out << "step\tstate\taction\tvalue\n";
  for (std::size_t h = 0; h < q.horizon(); ++h)
    for (std::size_t s = 0; s < q.n_states(); ++s)
      for (std::size_t a = 0; a < q.n_actions(); ++a)
        out << h << '\t' << s << '\t' << a << '\t' << format_double(q.at(h, s, a)) << '\n';
  return out.str();
}

QTable qtable_from_text(const std::string& text) {
  std::istringstream in(text);
  const HeaderFields f = parse_header(in, "symmfg-qtable v1");
  skip_column_line(in);
  QTable q(f.horizon, f.states, f.actions, f.tau);
  std::size_t h, s, a;
  double v;
  while (in >> h >> s >> a >> v) {
    if (h >= f.horizon || s >= f.states || a >= f.actions)
      throw std::runtime_error("q table: index out of range");
    q.at(h, s, a) = v;
  }
  return q;
}

void save_qtable(const QTable& q, const std::string& path) {
  write_file(path, qtable_to_text(q));
}

QTable load_qtable(const std::string& path) { return qtable_from_text(read_file(path)); }

std::string grid_function_to_text(const GridFunction& g) {
  const SimplexGrid& grid = g.grid();
  std::ostringstream out;
  out << "# symmfg-gridfn v1\n";
  out << "# states=" << grid.n_states() << " actions=" << grid.n_actions()
      << " denominator=" << grid.denominator() << " output_dim=" << g.output_dim()
      << " points=" << grid.size() << "\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const CountTable& counts = grid.point(i);
    for (std::size_t c = 0; c < counts.n_cells(); ++c) {
      if (c) out << '\t';
      out << counts[c];
    }
    for (std::size_t d = 0; d < g.output_dim(); ++d)
      out << '\t' << format_double(g.value(i)[d]);
    out << '\n';
  }
  return out.str();
}

GridFunction grid_function_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "# symmfg-gridfn v1")
    throw std::runtime_error("bad header: expected grid function");
  if (!std::getline(in, line)) throw std::runtime_error("bad header");
  std::size_t states = 0, actions = 0, dim = 1, points = 0;
  std::uint64_t denominator = 0;
  std::istringstream meta(line.substr(2));
  std::string token;
  while (meta >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    const auto key = token.substr(0, eq);
    const auto value = token.substr(eq + 1);
    if (key == "states") states = std::stoul(value);
    else if (key == "actions") actions = std::stoul(value);
    else if (key == "denominator") denominator = std::stoull(value);
    else if (key == "output_dim") dim = std::stoul(value);
    else if (key == "points") points = std::stoul(value);
  }
  auto grid = std::make_shared<SimplexGrid>(states, actions, denominator);
  if (grid->size() != points) throw std::runtime_error("grid function: point count mismatch");
  std::vector<std::vector<double>> values(grid->size());
  const std::size_t cells = states * actions;
  for (std::size_t row = 0; row < points; ++row) {
    CountTable counts(states, actions);
    for (std::size_t c = 0; c < cells; ++c) {
      std::uint64_t x;
      if (!(in >> x)) throw std::runtime_error("grid function: truncated row");
      counts[c] = static_cast<std::uint32_t>(x);
    }
    std::vector<double> v(dim);
    for (std::size_t d = 0; d < dim; ++d)
      if (!(in >> v[d])) throw std::runtime_error("grid function: truncated row");
    values[grid->index_of(counts)] = std::move(v);
  }
  return {std::move(grid), dim, std::move(values)};
}

void save_grid_function(const GridFunction& g, const std::string& path) {
  write_file(path, grid_function_to_text(g));
}

GridFunction load_grid_function(const std::string& path) {
  return grid_function_from_text(read_file(path));
}

namespace {

constexpr const char* kTraceColumns =
    "epoch\tsamples_consumed\tmfg_exploitability\tnplayer_exploitability_mean\t"
    "nplayer_exploitability_stderr\twall_time_s\n";

std::string trace_row_to_text(const MetricRow& row) {
  std::ostringstream out;
  out << row.epoch << '\t' << row.samples_consumed << '\t'
      << format_double(row.mfg_exploitability) << '\t'
      << format_double(row.nplayer_exploitability_mean) << '\t'
      << format_double(row.nplayer_exploitability_stderr) << '\t'
      << format_double(row.wall_time_s) << '\n';
  return out.str();
}

}  // namespace

MetricTraceWriter::MetricTraceWriter(const std::string& path) : out_(path) {
  if (!out_) throw std::runtime_error("cannot write trace '" + path + "'");
  out_ << kTraceColumns;
  out_.flush();
}

void MetricTraceWriter::append(const MetricRow& row) {
  out_ << trace_row_to_text(row);
  out_.flush();
}

std::string metric_trace_to_text(const MetricTrace& trace) {
  std::string out = kTraceColumns;
  for (const MetricRow& row : trace.rows) out += trace_row_to_text(row);
  return out;
}

MetricTrace metric_trace_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("epoch\t", 0) != 0)
    throw std::runtime_error("bad trace header");
  MetricTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, '\t')) fields.push_back(field);
    if (fields.size() != 6) throw std::runtime_error("trace row: expected 6 columns");
    MetricRow r;
    r.epoch = std::stoul(fields[0]);
    r.samples_consumed = std::stoull(fields[1]);
    // strtod accepts "nan"/"inf", which operator>> does not.
    r.mfg_exploitability = std::strtod(fields[2].c_str(), nullptr);
    r.nplayer_exploitability_mean = std::strtod(fields[3].c_str(), nullptr);
    r.nplayer_exploitability_stderr = std::strtod(fields[4].c_str(), nullptr);
    r.wall_time_s = std::strtod(fields[5].c_str(), nullptr);
    trace.rows.push_back(r);
  }
  return trace;
}

void write_trajectory_header(std::ostream& out) {
  out << "episode\tstep\tagent\tstate\taction\treward\n";
}

void append_trajectory_records(std::ostream& out, std::size_t episode, const Trajectory& t) {
  for (std::size_t h = 0; h < t.horizon(); ++h)
    for (std::size_t j = 0; j < t.num_agents(); ++j)
      out << episode << '\t' << h << '\t' << j << '\t' << t.states[h][j] << '\t'
          << t.actions[h][j] << '\t' << format_double(t.rewards[h][j]) << '\n';
}

}  // namespace symmfg
