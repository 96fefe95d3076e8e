#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "lomv/factor_model.hpp"
#include "lomv/hyperplane.hpp"
#include "lomv/kkt.hpp"
#include "lomv/panel.hpp"

namespace lomv::io {

// ---------------------------------------------------------------------------
// Number formatting

/// Shortest-independent, lossless text for a double: 17 significant digits.
inline std::string format_double(double x) {
  if (!std::isfinite(x)) throw InvalidInput("cannot serialize a non-finite number");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace detail

/**
 * Returns CSV: a header row of asset ids, then one row per period (n rows x p
 * columns). A leading column headed "date" or "period" holds period labels.
 */
inline ReturnsPanel read_returns_csv(std::istream& in) {
  std::string line;
  long line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    header = detail::split_csv_line(line);
    break;
  }
  if (header.empty()) throw ParseError("returns file is empty", 0);
  const bool labelled = !header.empty() && (detail::lower(header[0]) == "date" || detail::lower(header[0]) == "period");
  const std::size_t first = labelled ? 1 : 0;
  const std::size_t p = header.size() - first;
  if (p == 0) throw ParseError("returns header has no asset columns", line_no);

  ReturnsPanel panel;
  panel.asset_ids.assign(header.begin() + static_cast<std::ptrdiff_t>(first), header.end());
  for (std::size_t i = 0; i < p; ++i) {
    if (panel.asset_ids[i].empty()) throw ParseError("empty asset id in column " + std::to_string(i + first + 1), line_no);
  }
  {
    std::vector<std::string> sorted = panel.asset_ids;
    std::sort(sorted.begin(), sorted.end());
    const auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    if (dup != sorted.end()) throw ParseError("duplicate asset id '" + *dup + "'", line_no);
  }

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " columns, found " + std::to_string(cells.size()),
                       line_no);
    }
    std::vector<double> row(p);
    for (std::size_t i = 0; i < p; ++i) {
      const auto v = parse_double(cells[i + first]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError("invalid return value '" + cells[i + first] + "' for asset " + panel.asset_ids[i], line_no);
      }
      row[i] = *v;
    }
    if (labelled) panel.period_labels.push_back(cells[0]);
    rows.push_back(std::move(row));
  }
  panel.data.resize(static_cast<Index>(p), static_cast<Index>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t i = 0; i < p; ++i) panel.data(static_cast<Index>(i), static_cast<Index>(t)) = rows[t][i];
  }
  if (panel.n() < 2) throw ParseError("returns file needs at least two periods", line_no);
  return panel;
}

inline void write_returns_csv(std::ostream& out, const ReturnsPanel& panel) {
  const bool labelled = !panel.period_labels.empty();
  if (labelled) out << "period";
  for (Index i = 0; i < panel.p(); ++i) {
    if (labelled || i > 0) out << ',';
    out << panel.asset_ids[static_cast<std::size_t>(i)];
  }
  out << '\n';
  for (Index t = 0; t < panel.n(); ++t) {
    if (labelled) out << panel.period_labels[static_cast<std::size_t>(t)];
    for (Index i = 0; i < panel.p(); ++i) {
      if (labelled || i > 0) out << ',';
      out << format_double(panel.data(i, t));
    }
    out << '\n';
  }
}

struct MarketWeights {
  std::vector<std::string> asset_ids;
  VectorXd weights;        ///< normalized to sum to one
  double original_sum = 1.0;
  bool renormalized = false;  ///< true when |original_sum - 1| > 1e-6
};

/// Two-column CSV (asset id, weight); an optional non-numeric header row is skipped.
inline MarketWeights read_market_weights_csv(std::istream& in) {
  MarketWeights mw;
  std::vector<double> values;
  std::string line;
  long line_no = 0;
  bool first_row = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() != 2) throw ParseError("market weights need exactly two columns", line_no);
    const auto v = parse_double(cells[1]);
    if (!v) {
      if (first_row) {
        first_row = false;
        continue;
      }
      throw ParseError("invalid weight '" + cells[1] + "'", line_no);
    }
    first_row = false;
    if (!std::isfinite(*v)) throw ParseError("non-finite weight", line_no);
    mw.asset_ids.push_back(cells[0]);
    values.push_back(*v);
  }
  if (values.empty()) throw ParseError("market weights file has no rows", line_no);
  mw.weights = Eigen::Map<const VectorXd>(values.data(), static_cast<Index>(values.size()));
  mw.original_sum = compensated_sum(mw.weights);
  if (!(mw.original_sum > 0.0)) throw InvalidInput("market weights must have a positive sum");
  mw.renormalized = std::abs(mw.original_sum - 1.0) > 1e-6;
  mw.weights /= mw.original_sum;
  return mw;
}

/// Reorders market weights to the given asset order; every asset must appear exactly once.
inline VectorXd align_market_weights(const MarketWeights& mw, const std::vector<std::string>& asset_ids) {
  std::map<std::string, double> by_id;
  for (std::size_t i = 0; i < mw.asset_ids.size(); ++i) {
    if (!by_id.emplace(mw.asset_ids[i], mw.weights[static_cast<Index>(i)]).second) {
      throw InvalidInput("duplicate market weight for asset '" + mw.asset_ids[i] + "'");
    }
  }
  if (by_id.size() != asset_ids.size()) {
    throw InvalidInput("market weights cover " + std::to_string(by_id.size()) + " assets, returns have " +
                       std::to_string(asset_ids.size()));
  }
  VectorXd out(static_cast<Index>(asset_ids.size()));
  for (std::size_t i = 0; i < asset_ids.size(); ++i) {
    const auto it = by_id.find(asset_ids[i]);
    if (it == by_id.end()) throw InvalidInput("no market weight for asset '" + asset_ids[i] + "'");
    out[static_cast<Index>(i)] = it->second;
  }
  return out / compensated_sum(out);
}

inline void write_market_weights_csv(std::ostream& out, const std::vector<std::string>& ids, const VectorXd& w) {
  out << "asset,weight\n";
  for (std::size_t i = 0; i < ids.size(); ++i) out << ids[i] << ',' << format_double(w[static_cast<Index>(i)]) << '\n';
}

// ---------------------------------------------------------------------------
// Canonical JSON output

namespace detail {

inline std::string quote(const std::string& s) { return nlohmann::json(s).dump(); }

inline std::string number_array(const double* data, Index size) {
  std::string out = "[";
  for (Index i = 0; i < size; ++i) {
    if (i > 0) out += ", ";
    out += format_double(data[i]);
  }
  return out + "]";
}

inline std::string number_array(const VectorXd& v) { return number_array(v.data(), v.size()); }

/// Row-major flattening.
inline std::string matrix_array(const MatrixXd& m) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  return number_array(rm.data(), rm.size());
}

inline std::string string_array(const std::vector<std::string>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ", ";
    out += quote(v[i]);
  }
  return out + "]";
}

inline std::string index_ids(const std::vector<Index>& idx, const std::vector<std::string>& ids) {
  std::vector<std::string> names;
  for (Index i : idx) names.push_back(ids[static_cast<std::size_t>(i)]);
  return string_array(names);
}

/// Builds a JSON object with fixed key order and one member per line.
class ObjectWriter {
 public:
  explicit ObjectWriter(int indent = 0) : indent_(indent) {}

  ObjectWriter& raw(const std::string& key, const std::string& value) {
    members_.emplace_back(key, value);
    return *this;
  }
  ObjectWriter& number(const std::string& key, double v) { return raw(key, format_double(v)); }
  ObjectWriter& integer(const std::string& key, long long v) { return raw(key, std::to_string(v)); }
  ObjectWriter& boolean(const std::string& key, bool v) { return raw(key, v ? "true" : "false"); }
  ObjectWriter& string(const std::string& key, const std::string& v) { return raw(key, quote(v)); }

  std::string str() const {
    const std::string pad(static_cast<std::size_t>(indent_ + 2), ' ');
    std::string out = "{\n";
    for (std::size_t i = 0; i < members_.size(); ++i) {
      out += pad + quote(members_[i].first) + ": " + members_[i].second;
      out += i + 1 < members_.size() ? ",\n" : "\n";
    }
    return out + std::string(static_cast<std::size_t>(indent_), ' ') + "}";
  }

 private:
  int indent_;
  std::vector<std::pair<std::string, std::string>> members_;
};

inline nlohmann::json parse_json(std::istream& in) {
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
    const long line = 1 + static_cast<long>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
    throw ParseError(std::string("malformed JSON: ") + e.what(), line);
  }
}

inline const nlohmann::json& field(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing field '") + key + "'", 0);
  return j.at(key);
}

inline std::vector<double> numbers(const nlohmann::json& j, const char* key) {
  const nlohmann::json& a = field(j, key);
  if (!a.is_array()) throw ParseError(std::string("field '") + key + "' must be an array", 0);
  std::vector<double> out;
  for (const auto& v : a) {
    if (!v.is_number()) throw ParseError(std::string("field '") + key + "' must contain numbers", 0);
    out.push_back(v.get<double>());
  }
  return out;
}

inline std::vector<std::string> strings(const nlohmann::json& j, const char* key) {
  const nlohmann::json& a = field(j, key);
  if (!a.is_array()) throw ParseError(std::string("field '") + key + "' must be an array", 0);
  std::vector<std::string> out;
  for (const auto& v : a) {
    if (!v.is_string()) throw ParseError(std::string("field '") + key + "' must contain strings", 0);
    out.push_back(v.get<std::string>());
  }
  return out;
}

inline MatrixXd row_major(const std::vector<double>& v, Index rows, Index cols, const char* key) {
  if (static_cast<Index>(v.size()) != rows * cols) {
    throw ParseError(std::string("field '") + key + "' has " + std::to_string(v.size()) + " entries, expected " +
                         std::to_string(rows * cols),
                     0);
  }
  MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Model files

struct ModelMeta {
  std::string estimator;
  std::optional<std::uint64_t> seed;
  std::string created;  ///< producing command; never a wall-clock time
};

/// A covariance model on disk: factor form by default, or a dense matrix.
struct ModelFile {
  bool dense = false;
  FactorModel factor;
  DenseCovariance covariance;
  ModelMeta meta;

  const std::vector<std::string>& asset_ids() const { return dense ? covariance.asset_ids : factor.asset_ids; }
  Index p() const { return dense ? covariance.p() : factor.p(); }
};

inline std::string model_json(const ModelFile& file) {
  detail::ObjectWriter meta(2);
  meta.string("estimator", file.meta.estimator);
  meta.raw("seed", file.meta.seed ? std::to_string(*file.meta.seed) : "null");
  meta.string("created", file.meta.created);

  detail::ObjectWriter w;
  w.raw("assets", detail::string_array(file.asset_ids()));
  if (file.dense) {
    w.string("kind", "dense");
    w.raw("sigma", detail::matrix_array(file.covariance.sigma));
  } else {
    w.integer("q", file.factor.q());
    w.raw("B", detail::matrix_array(file.factor.exposures));
    w.raw("omega", detail::matrix_array(file.factor.factor_cov));
    w.raw("delta_sq", detail::number_array(file.factor.specific_var));
  }
  w.raw("meta", meta.str());
  return w.str() + "\n";
}

inline void write_model_json(std::ostream& out, const ModelFile& file) { out << model_json(file); }

inline ModelFile read_model_json(std::istream& in) {
  const nlohmann::json j = detail::parse_json(in);
  ModelFile file;
  const std::vector<std::string> assets = detail::strings(j, "assets");
  const Index p = static_cast<Index>(assets.size());
  if (p < 1) throw ParseError("model has no assets", 0);
  file.dense = j.contains("kind") && j.at("kind") == "dense";
  if (file.dense) {
    file.covariance.sigma = detail::row_major(detail::numbers(j, "sigma"), p, p, "sigma");
    file.covariance.asset_ids = assets;
  } else {
    const nlohmann::json& qj = detail::field(j, "q");
    if (!qj.is_number_integer() || qj.get<long long>() < 1) throw ParseError("field 'q' must be a positive integer", 0);
    const Index q = qj.get<Index>();
    file.factor.exposures = detail::row_major(detail::numbers(j, "B"), p, q, "B");
    file.factor.factor_cov = detail::row_major(detail::numbers(j, "omega"), q, q, "omega");
    const std::vector<double> d = detail::numbers(j, "delta_sq");
    file.factor.specific_var = detail::row_major(d, p, 1, "delta_sq");
    file.factor.asset_ids = assets;
  }
  if (j.contains("meta") && j.at("meta").is_object()) {
    const nlohmann::json& m = j.at("meta");
    if (m.contains("estimator") && m.at("estimator").is_string()) file.meta.estimator = m.at("estimator");
    if (m.contains("seed") && m.at("seed").is_number_unsigned()) file.meta.seed = m.at("seed").get<std::uint64_t>();
    if (m.contains("created") && m.at("created").is_string()) file.meta.created = m.at("created");
  }
  if (file.dense) {
    file.covariance.validate();
  } else {
    file.factor.validate();
  }
  return file;
}

// ---------------------------------------------------------------------------
// Solution files

struct RSequenceRecord {
  std::vector<std::string> order;
  VectorXd values;
  Index k = 0;
  Index peak = 0;
};

struct HyperplaneRecord {
  Hyperplane hk;
  Hyperplane hl;
  std::optional<double> angle;  ///< q = 2 only
};

struct SolutionFile {
  std::vector<std::string> asset_ids;
  LomvSolution solution;
  std::optional<double> threshold;  ///< q = 1
  std::optional<bool> flipped;      ///< q = 1: beta sign was negated before sorting
  std::optional<RSequenceRecord> r_sequence;
  std::optional<HyperplaneRecord> hyperplane;
};

namespace detail {

inline std::string hyperplane_json(const Hyperplane& hp, int indent) {
  ObjectWriter w(indent);
  w.raw("h", number_array(hp.h));
  w.raw("margins", number_array(hp.margins));
  return w.str();
}

}  // namespace detail

inline std::string solution_json(const SolutionFile& f) {
  const LomvSolution& s = f.solution;
  detail::ObjectWriter kkt(2);
  kkt.number("stationarity", s.kkt.stationarity)
      .number("feasibility", s.kkt.feasibility)
      .number("complementarity", s.kkt.complementarity)
      .number("dual_feasibility", s.kkt.dual_feasibility)
      .number("tolerance", s.kkt.tolerance)
      .number("scale", s.kkt.scale)
      .boolean("passed", s.kkt.passed);

  detail::ObjectWriter w;
  w.raw("assets", detail::string_array(f.asset_ids));
  w.string("method", std::string(to_string(s.method)));
  w.raw("weights", detail::number_array(s.weights));
  w.raw("active", detail::index_ids(s.active.indices(), f.asset_ids));
  w.raw("boundary", detail::index_ids(s.boundary, f.asset_ids));
  w.number("nu", s.nu);
  w.raw("lambda", detail::number_array(s.lambda));
  w.number("objective", s.objective);
  w.integer("iterations", s.iterations);
  w.raw("kkt", kkt.str());
  if (f.threshold) w.number("threshold", *f.threshold);
  if (f.flipped) w.boolean("flipped", *f.flipped);
  if (f.r_sequence) {
    detail::ObjectWriter r(2);
    r.raw("order", detail::string_array(f.r_sequence->order))
        .raw("values", detail::number_array(f.r_sequence->values))
        .integer("k", f.r_sequence->k)
        .integer("peak", f.r_sequence->peak);
    w.raw("r_sequence", r.str());
  }
  if (f.hyperplane) {
    detail::ObjectWriter h(2);
    h.raw("hk", detail::hyperplane_json(f.hyperplane->hk, 4))
        .raw("hl", detail::hyperplane_json(f.hyperplane->hl, 4))
        .boolean("full_rank", f.hyperplane->hk.full_rank);
    if (f.hyperplane->angle) h.number("angle", *f.hyperplane->angle);
    w.raw("hyperplane", h.str());
  }
  return w.str() + "\n";
}

inline void write_solution_json(std::ostream& out, const SolutionFile& f) { out << solution_json(f); }

inline SolutionFile read_solution_json(std::istream& in) {
  const nlohmann::json j = detail::parse_json(in);
  SolutionFile f;
  f.asset_ids = detail::strings(j, "assets");
  const Index p = static_cast<Index>(f.asset_ids.size());
  std::map<std::string, Index> pos;
  for (Index i = 0; i < p; ++i) pos[f.asset_ids[static_cast<std::size_t>(i)]] = i;
  auto to_indices = [&](const char* key) {
    std::vector<Index> idx;
    for (const std::string& id : detail::strings(j, key)) {
      const auto it = pos.find(id);
      if (it == pos.end()) throw ParseError(std::string("unknown asset '") + id + "' in '" + key + "'", 0);
      idx.push_back(it->second);
    }
    return idx;
  };

  LomvSolution& s = f.solution;
  s.weights = detail::row_major(detail::numbers(j, "weights"), p, 1, "weights");
  s.lambda = detail::row_major(detail::numbers(j, "lambda"), p, 1, "lambda");
  s.active = AssetSubset::from_unsorted(to_indices("active"), p);
  s.boundary = to_indices("boundary");
  s.nu = detail::field(j, "nu").get<double>();
  s.objective = detail::field(j, "objective").get<double>();
  s.iterations = detail::field(j, "iterations").get<Index>();
  const std::string method = detail::field(j, "method").get<std::string>();
  for (SolverMethod m : {SolverMethod::explicit_formula, SolverMethod::active_set, SolverMethod::projected_gradient,
                         SolverMethod::oracle}) {
    if (to_string(m) == method) s.method = m;
  }
  const nlohmann::json& kkt = detail::field(j, "kkt");
  s.kkt.stationarity = detail::field(kkt, "stationarity").get<double>();
  s.kkt.feasibility = detail::field(kkt, "feasibility").get<double>();
  s.kkt.complementarity = detail::field(kkt, "complementarity").get<double>();
  s.kkt.dual_feasibility = detail::field(kkt, "dual_feasibility").get<double>();
  s.kkt.tolerance = detail::field(kkt, "tolerance").get<double>();
  s.kkt.scale = detail::field(kkt, "scale").get<double>();
  s.kkt.passed = detail::field(kkt, "passed").get<bool>();
  s.kkt.min_weight = s.weights.minCoeff();

  if (j.contains("threshold")) f.threshold = j.at("threshold").get<double>();
  if (j.contains("flipped")) f.flipped = j.at("flipped").get<bool>();
  if (j.contains("r_sequence")) {
    const nlohmann::json& r = j.at("r_sequence");
    RSequenceRecord rec;
    rec.order = detail::strings(r, "order");
    const std::vector<double> v = detail::numbers(r, "values");
    rec.values = detail::row_major(v, static_cast<Index>(v.size()), 1, "values");
    rec.k = detail::field(r, "k").get<Index>();
    rec.peak = detail::field(r, "peak").get<Index>();
    f.r_sequence = std::move(rec);
  }
  if (j.contains("hyperplane")) {
    const nlohmann::json& h = j.at("hyperplane");
    HyperplaneRecord rec;
    auto read_hp = [&](const char* key, HyperplaneVariant variant) {
      const nlohmann::json& o = detail::field(h, key);
      Hyperplane hp;
      const std::vector<double> hv = detail::numbers(o, "h");
      hp.h = detail::row_major(hv, static_cast<Index>(hv.size()), 1, "h");
      hp.margins = detail::row_major(detail::numbers(o, "margins"), p, 1, "margins");
      hp.variant = variant;
      hp.full_rank = detail::field(h, "full_rank").get<bool>();
      return hp;
    };
    rec.hk = read_hp("hk", HyperplaneVariant::hk);
    rec.hl = read_hp("hl", HyperplaneVariant::hl);
    if (h.contains("angle")) rec.angle = h.at("angle").get<double>();
    f.hyperplane = std::move(rec);
  }
  return f;
}

// ---------------------------------------------------------------------------
// File helpers

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path + "' for reading");
  return in;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw InvalidInput("failed writing '" + path + "'");
}

}  // namespace lomv::io
