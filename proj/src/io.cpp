#include "semimix/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace semimix::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA"; }

double parse_double(const std::string& cell, const std::string& column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    throw Error(ErrorKind::Schema, "column '" + column + "': '" + cell + "' is not a number");
  }
  return v;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

struct ColumnSpec {
  std::string name;
  std::string role;
  bool categorical = false;
  std::vector<std::string> levels;
};

std::vector<ColumnSpec> parse_sidecar(const json& j) {
  if (!j.is_object() || !j.contains("schema_version") || !j.contains("columns")) {
    throw Error(ErrorKind::Schema, "sidecar needs schema_version and columns");
  }
  const std::string version = j["schema_version"].get<std::string>();
  int major = -1;
  std::from_chars(version.data(), version.data() + version.size(), major);
  if (major != kSchemaMajor) {
    throw Error(ErrorKind::Schema, "unsupported schema version " + version);
  }
  std::vector<ColumnSpec> cols;
  int n_y = 0;
  for (const auto& c : j["columns"]) {
    ColumnSpec s;
    s.name = c.at("name").get<std::string>();
    s.role = c.at("role").get<std::string>();
    const std::string type = c.value("type", "continuous");
    if (s.role != "U" && s.role != "X" && s.role != "Y" && s.role != "Z") {
      throw Error(ErrorKind::Schema, "column '" + s.name + "' has unknown role " + s.role);
    }
    if (type != "continuous" && type != "categorical") {
      throw Error(ErrorKind::Schema, "column '" + s.name + "' has unknown type " + type);
    }
    s.categorical = type == "categorical";
    if (s.categorical) {
      if (!c.contains("levels") || c["levels"].empty()) {
        throw Error(ErrorKind::Schema, "categorical column '" + s.name + "' lists no levels");
      }
      s.levels = c["levels"].get<std::vector<std::string>>();
    }
    if ((s.role == "U" || s.role == "Y") && s.categorical) {
      throw Error(ErrorKind::Schema, "column '" + s.name + "': U and Y must be continuous");
    }
    if (s.role == "Y") ++n_y;
    cols.push_back(std::move(s));
  }
  if (n_y != 1) throw Error(ErrorKind::Schema, "exactly one Y column is required");
  return cols;
}

}  // namespace

fs::path sidecar_path(const fs::path& csv) {
  fs::path p = csv;
  p.replace_extension(".schema.json");
  return p;
}

json make_sidecar(const Dataset& data) {
  json cols = json::array();
  cols.push_back({{"name", data.y_name}, {"role", "Y"}, {"type", "continuous"}});
  for (std::size_t j = 0; j < data.d_u(); ++j) {
    const std::string name = j < data.u_names.size() ? data.u_names[j] : "u" + std::to_string(j + 1);
    cols.push_back({{"name", name}, {"role", "U"}, {"type", "continuous"}});
  }
  for (const XColumn& c : data.x) {
    json entry = {{"name", c.name}, {"role", "X"}};
    if (c.is_continuous()) {
      entry["type"] = "continuous";
    } else {
      entry["type"] = "categorical";
      std::vector<std::string> levels = c.level_names;
      if (levels.size() != static_cast<std::size_t>(c.cardinality)) {
        levels.clear();
        for (int l = 0; l < c.cardinality; ++l) levels.push_back(std::to_string(l));
      }
      entry["levels"] = levels;
    }
    cols.push_back(entry);
  }
  if (data.true_z) {
    int k = 0;
    for (int z : *data.true_z) k = std::max(k, z + 1);
    std::vector<std::string> levels;
    for (int l = 1; l <= k; ++l) levels.push_back(std::to_string(l));
    cols.push_back({{"name", "z"}, {"role", "Z"}, {"type", "categorical"}, {"levels", levels}});
  }
  return {{"schema_version", kSchemaVersion}, {"columns", cols}};
}

void write_dataset(const Dataset& data, const fs::path& csv) {
  data.validate();
  const json sidecar = make_sidecar(data);
  std::ofstream out(csv);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + csv.string());
  bool first = true;
  for (const auto& c : sidecar["columns"]) {
    out << (first ? "" : ",") << c["name"].get<std::string>();
    first = false;
  }
  out << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    out << format_double(data.y(static_cast<Eigen::Index>(i)));
    for (std::size_t j = 0; j < data.d_u(); ++j) {
      out << ',' << format_double(data.u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    for (const XColumn& c : data.x) {
      out << ',';
      if (c.is_continuous()) {
        out << format_double(c.values[i]);
      } else {
        const int level = c.levels[i];
        out << (c.level_names.size() == static_cast<std::size_t>(c.cardinality)
                    ? c.level_names[static_cast<std::size_t>(level)]
                    : std::to_string(level));
      }
    }
    if (data.true_z) out << ',' << (*data.true_z)[i] + 1;
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + csv.string());
  std::ofstream side(sidecar_path(csv));
  if (!side) throw Error(ErrorKind::Io, "cannot write " + sidecar_path(csv).string());
  side << sidecar.dump(2) << '\n';
}

Dataset read_dataset(const fs::path& csv) { return read_dataset(csv, sidecar_path(csv)); }

Dataset read_dataset(const fs::path& csv, const fs::path& sidecar, std::size_t* dropped) {
  std::ifstream side(sidecar);
  if (!side) throw Error(ErrorKind::Io, "cannot read " + sidecar.string());
  json j;
  try {
    j = json::parse(side);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Schema, sidecar.string() + ": " + e.what());
  }
  std::vector<ColumnSpec> specs;
  try {
    specs = parse_sidecar(j);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Schema, sidecar.string() + ": " + e.what());
  }

  std::ifstream in(csv);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + csv.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Schema, csv.string() + " is empty");
  const std::vector<std::string> header = split_line(line);
  std::map<std::string, std::size_t> position;
  for (std::size_t c = 0; c < header.size(); ++c) position[header[c]] = c;
  std::vector<std::size_t> where;
  for (const ColumnSpec& s : specs) {
    const auto it = position.find(s.name);
    if (it == position.end()) throw Error(ErrorKind::Schema, "column '" + s.name + "' missing from header");
    where.push_back(it->second);
  }

  std::vector<std::vector<double>> numeric(specs.size());
  std::vector<std::vector<int>> coded(specs.size());
  std::size_t skipped = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::Schema, csv.string() + ":" + std::to_string(line_no) + ": expected " +
                                         std::to_string(header.size()) + " cells");
    }
    bool missing = false;
    for (std::size_t c = 0; c < specs.size(); ++c) missing = missing || is_missing(cells[where[c]]);
    if (missing) {
      ++skipped;
      continue;
    }
    for (std::size_t c = 0; c < specs.size(); ++c) {
      const std::string& cell = cells[where[c]];
      if (!specs[c].categorical) {
        numeric[c].push_back(parse_double(cell, specs[c].name));
        continue;
      }
      const auto& levels = specs[c].levels;
      const auto it = std::find(levels.begin(), levels.end(), cell);
      if (it == levels.end()) {
        throw Error(ErrorKind::InvalidLevel, "column '" + specs[c].name + "': unknown level '" + cell + "'");
      }
      coded[c].push_back(static_cast<int>(it - levels.begin()));
    }
  }
  if (dropped) *dropped = skipped;

  Dataset data;
  std::size_t n = 0;
  for (std::size_t c = 0; c < specs.size(); ++c) n = std::max({n, numeric[c].size(), coded[c].size()});
  if (n == 0) throw Error(ErrorKind::Schema, csv.string() + " has no complete rows");
  std::vector<std::size_t> u_cols;
  for (std::size_t c = 0; c < specs.size(); ++c) {
    if (specs[c].role == "U") u_cols.push_back(c);
  }
  data.u.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(u_cols.size()));
  for (std::size_t j = 0; j < u_cols.size(); ++j) {
    data.u.col(static_cast<Eigen::Index>(j)) =
        Eigen::Map<const Eigen::VectorXd>(numeric[u_cols[j]].data(), static_cast<Eigen::Index>(n));
    data.u_names.push_back(specs[u_cols[j]].name);
  }
  for (std::size_t c = 0; c < specs.size(); ++c) {
    const ColumnSpec& s = specs[c];
    if (s.role == "Y") {
      data.y = Eigen::Map<const Eigen::VectorXd>(numeric[c].data(), static_cast<Eigen::Index>(n));
      data.y_name = s.name;
    } else if (s.role == "X") {
      data.x.push_back(s.categorical
                           ? XColumn::categorical(s.name, coded[c], static_cast<int>(s.levels.size()), s.levels)
                           : XColumn::continuous(s.name, numeric[c]));
    } else if (s.role == "Z") {
      std::vector<int> z;
      if (s.categorical) {
        z = coded[c];
      } else {
        for (double v : numeric[c]) z.push_back(static_cast<int>(std::lround(v)) - 1);
      }
      data.true_z = std::move(z);
    }
  }
  data.validate();
  return data;
}

namespace {

ColumnScale scale_of(const std::string& name, const double* v, std::size_t n) {
  const Eigen::Map<const Eigen::VectorXd> x(v, static_cast<Eigen::Index>(n));
  ColumnScale s{name, x.mean(), 1.0};
  const double var = (x.array() - s.mean).square().sum() / std::max<double>(1.0, static_cast<double>(n) - 1.0);
  s.sd = var > 0.0 ? std::sqrt(var) : 1.0;
  return s;
}

}  // namespace

Standardization Standardization::fit(const Dataset& data) {
  Standardization st;
  for (std::size_t j = 0; j < data.d_u(); ++j) {
    const Eigen::VectorXd col = data.u.col(static_cast<Eigen::Index>(j));
    const std::string name = j < data.u_names.size() ? data.u_names[j] : "u" + std::to_string(j + 1);
    st.u.push_back(scale_of(name, col.data(), data.n()));
  }
  for (const XColumn& c : data.x) {
    if (c.is_continuous()) st.x.push_back(scale_of(c.name, c.values.data(), data.n()));
  }
  st.y = scale_of(data.y_name, data.y.data(), data.n());
  return st;
}

void Standardization::apply(Dataset& data) const {
  if (data.d_u() != u.size()) throw Error(ErrorKind::LengthMismatch, "U columns differ from the stored scales");
  for (std::size_t j = 0; j < u.size(); ++j) {
    auto col = data.u.col(static_cast<Eigen::Index>(j));
    col = (col.array() - u[j].mean) / u[j].sd;
  }
  std::size_t next = 0;
  for (XColumn& c : data.x) {
    if (!c.is_continuous()) continue;
    if (next >= x.size() || x[next].name != c.name) {
      throw Error(ErrorKind::Schema, "continuous column '" + c.name + "' has no stored scale");
    }
    for (double& v : c.values) v = (v - x[next].mean) / x[next].sd;
    ++next;
  }
  if (next != x.size()) throw Error(ErrorKind::Schema, "dataset lacks stored continuous columns");
  data.y = (data.y.array() - y.mean) / y.sd;
}

RegressionCoefficients Standardization::to_original(const RegressionCoefficients& scaled) const {
  RegressionCoefficients out = scaled;
  double shift = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    out.gamma(jj) = y.sd * scaled.gamma(jj) / u[j].sd;
    shift += out.gamma(jj) * u[j].mean;
  }
  out.delta = (y.mean + y.sd * scaled.delta.array() - shift).matrix();
  return out;
}

json Standardization::to_json() const {
  auto dump = [](const std::vector<ColumnScale>& cols) {
    json a = json::array();
    for (const auto& c : cols) a.push_back({{"name", c.name}, {"mean", c.mean}, {"sd", c.sd}});
    return a;
  };
  return {{"u", dump(u)}, {"x", dump(x)}, {"y", {{"name", y.name}, {"mean", y.mean}, {"sd", y.sd}}}};
}

Standardization Standardization::from_json(const json& j) {
  auto load = [](const json& a) {
    std::vector<ColumnScale> cols;
    for (const auto& c : a) cols.push_back({c.at("name"), c.at("mean"), c.at("sd")});
    return cols;
  };
  Standardization st;
  st.u = load(j.at("u"));
  st.x = load(j.at("x"));
  st.y = {j.at("y").at("name"), j.at("y").at("mean"), j.at("y").at("sd")};
  return st;
}

}  // namespace semimix::io
