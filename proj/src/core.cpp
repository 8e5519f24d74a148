#include "sseval/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "sseval/csv.hpp"
#include "sseval/error.hpp"

namespace sseval {

using nlohmann::json;

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Accuracy: return "accuracy";
    case LossKind::SquaredError: return "squared_error";
    case LossKind::CrossEntropy: return "cross_entropy";
  }
  return "accuracy";
}

LossKind loss_kind_from_string(std::string_view name) {
  if (name == "accuracy") return LossKind::Accuracy;
  if (name == "squared_error") return LossKind::SquaredError;
  if (name == "cross_entropy") return LossKind::CrossEntropy;
  throw ParseError("unknown loss kind '" + std::string(name) + "'");
}

namespace {

void validate_unit(const Unit& u, LossKind kind, const std::string& where) {
  if (u.id.empty()) throw ParseError(where + ": empty id");
  if (!std::isfinite(u.proxy)) throw PreconditionError(where + ": proxy is not finite");
  if (kind == LossKind::Accuracy) {
    if (u.proxy < 0.0 || u.proxy > 1.0) {
      throw PreconditionError(where + ": proxy " + csv::format_double(u.proxy) +
                              " outside [0,1] for accuracy loss");
    }
    if (u.loss && *u.loss != 0.0 && *u.loss != 1.0) {
      throw PreconditionError(where + ": accuracy loss must be 0 or 1, got " + csv::format_double(*u.loss));
    }
  } else {
    if (u.proxy < 0.0) throw PreconditionError(where + ": negative proxy");
    if (u.loss && (!std::isfinite(*u.loss) || *u.loss < 0.0)) {
      throw PreconditionError(where + ": loss must be a nonnegative finite number");
    }
  }
  if (u.proxy_sq && (!std::isfinite(*u.proxy_sq) || *u.proxy_sq < 0.0)) {
    throw PreconditionError(where + ": proxy_sq must be nonnegative");
  }
}

}  // namespace

Population::Population(std::vector<Unit> units, LossKind kind) : units_(std::move(units)), kind_(kind) {
  if (units_.size() < 2) throw PreconditionError("population needs at least 2 units");
  index_.reserve(units_.size());
  embedding_dim_ = units_.front().embedding.size();
  for (std::size_t i = 0; i < units_.size(); ++i) {
    const Unit& u = units_[i];
    const std::string where = "unit " + std::to_string(i + 1) + " ('" + u.id + "')";
    validate_unit(u, kind_, where);
    if (!index_.emplace(u.id, i).second) throw ConsistencyError("duplicate id '" + u.id + "'");
    if (u.embedding.size() != embedding_dim_) {
      throw ConsistencyError(where + ": embedding dimension " + std::to_string(u.embedding.size()) +
                             " differs from " + std::to_string(embedding_dim_));
    }
  }
}

std::optional<std::size_t> Population::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Eigen::VectorXd Population::proxies() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) v[static_cast<Eigen::Index>(i)] = units_[i].proxy;
  return v;
}

Eigen::VectorXd Population::proxy_second_moments() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) {
    const Unit& u = units_[i];
    if (u.proxy_sq) {
      v[static_cast<Eigen::Index>(i)] = *u.proxy_sq;
    } else if (kind_ == LossKind::Accuracy) {
      v[static_cast<Eigen::Index>(i)] = u.proxy;
    } else {
      throw PreconditionError("unit '" + u.id + "' has no second-moment proxy; supply class scores");
    }
  }
  return v;
}

Eigen::VectorXd Population::losses() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) {
    if (!units_[i].loss) throw PreconditionError("unit '" + units_[i].id + "' has no loss");
    v[static_cast<Eigen::Index>(i)] = *units_[i].loss;
  }
  return v;
}

bool Population::fully_labelled() const noexcept {
  return std::all_of(units_.begin(), units_.end(), [](const Unit& u) { return u.loss.has_value(); });
}

Eigen::MatrixXd Population::embeddings() const {
  if (!has_embeddings()) throw PreconditionError("population has no embeddings");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(size()), embedding_dim_);
  for (std::size_t i = 0; i < size(); ++i) m.row(static_cast<Eigen::Index>(i)) = units_[i].embedding.transpose();
  return m;
}

double Population::finite_mean() const { return losses().mean(); }

Population Population::subset(std::span<const std::size_t> positions) const {
  std::vector<Unit> out;
  out.reserve(positions.size());
  for (std::size_t p : positions) out.push_back(units_.at(p));
  return Population(std::move(out), kind_);
}

// --- losses ---------------------------------------------------------------

void check_probability_vector(std::span<const double> scores, const std::string& where) {
  if (scores.empty()) throw PreconditionError(where + ": empty score vector");
  double total = 0.0;
  for (double s : scores) {
    if (!std::isfinite(s) || s < 0.0) throw PreconditionError(where + ": scores must be nonnegative");
    total += s;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw PreconditionError(where + ": scores sum to " + csv::format_double(total) + ", not 1");
  }
}

double eval_loss(LossKind kind, std::size_t label, std::span<const double> scores) {
  check_probability_vector(scores, "eval_loss");
  if (label >= scores.size()) throw PreconditionError("eval_loss: label index out of range");
  switch (kind) {
    case LossKind::Accuracy: {
      // First maximum wins ties.
      const auto top = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
      return top == label ? 1.0 : 0.0;
    }
    case LossKind::SquaredError: {
      const double miss = 1.0 - scores[label];
      return miss * miss;
    }
    case LossKind::CrossEntropy: return -std::log(std::max(scores[label], kLogFloor));
  }
  return 0.0;
}

std::pair<double, double> conditional_moments(LossKind kind, std::span<const double> scores) {
  check_probability_vector(scores, "conditional_moments");
  switch (kind) {
    case LossKind::Accuracy: {
      const double top = *std::max_element(scores.begin(), scores.end());
      return {top, top};
    }
    case LossKind::SquaredError: {
      double m1 = 0.0, m2 = 0.0;
      for (double s : scores) {
        const double sq = (1.0 - s) * (1.0 - s);
        m1 += s * sq;
        m2 += s * sq * sq;
      }
      return {m1, m2};
    }
    case LossKind::CrossEntropy: {
      double m1 = 0.0, m2 = 0.0;
      for (double s : scores) {
        const double nll = -std::log(std::max(s, kLogFloor));
        m1 += s * nll;
        m2 += s * nll * nll;
      }
      return {m1, m2};
    }
  }
  return {0.0, 0.0};
}

// --- ingestion ------------------------------------------------------------

namespace {

void apply_class_scores(std::vector<Unit>& units, const LossSpec& spec) {
  if (spec.class_scores.empty()) return;
  if (spec.class_scores.size() != units.size()) {
    throw ConsistencyError("class-score sidecar has " + std::to_string(spec.class_scores.size()) +
                           " entries for " + std::to_string(units.size()) + " units");
  }
  for (Unit& u : units) {
    auto it = spec.class_scores.find(u.id);
    if (it == spec.class_scores.end()) throw ConsistencyError("no class scores for id '" + u.id + "'");
    const ClassScores& cs = it->second;
    auto [m1, m2] = conditional_moments(spec.kind, cs.scores);
    u.proxy = m1;
    u.proxy_sq = m2;
    if (!u.loss && cs.label) u.loss = eval_loss(spec.kind, *cs.label, cs.scores);
  }
}

Population ingest_csv(std::string_view text, const LossSpec& spec, const IngestOptions& options,
                      const std::string& source) {
  const csv::Table table = csv::parse(text, source);
  const auto id_col = table.column("id");
  if (!id_col) throw ParseError(source + ": missing 'id' column");
  const auto proxy_col = table.column(options.proxy_column);
  if (!proxy_col && spec.class_scores.empty()) {
    throw ParseError(source + ": missing '" + options.proxy_column + "' column");
  }
  const auto loss_col = table.column("loss");
  const auto sq_col = table.column("proxy_sq");
  std::vector<std::size_t> emb_cols;
  for (std::size_t d = 0;; ++d) {
    auto c = table.column("emb_" + std::to_string(d));
    if (!c) break;
    emb_cols.push_back(*c);
  }

  std::vector<Unit> units;
  units.reserve(table.rows.size());
  std::unordered_map<std::string, std::size_t> seen;
  for (const csv::Row& row : table.rows) {
    const std::string where = source + ": line " + std::to_string(row.line);
    Unit u;
    u.id = row.fields[*id_col];
    if (proxy_col) u.proxy = csv::parse_double(row.fields[*proxy_col], where);
    if (sq_col && !row.fields[*sq_col].empty()) u.proxy_sq = csv::parse_double(row.fields[*sq_col], where);
    if (loss_col && !row.fields[*loss_col].empty()) u.loss = csv::parse_double(row.fields[*loss_col], where);
    if (!emb_cols.empty()) {
      u.embedding.resize(static_cast<Eigen::Index>(emb_cols.size()));
      for (std::size_t d = 0; d < emb_cols.size(); ++d) {
        u.embedding[static_cast<Eigen::Index>(d)] = csv::parse_double(row.fields[emb_cols[d]], where);
      }
    }
    if (spec.class_scores.empty()) validate_unit(u, spec.kind, where);
    if (!seen.emplace(u.id, row.line).second) {
      throw ConsistencyError(where + ": duplicate id '" + u.id + "' (first seen on line " +
                             std::to_string(seen[u.id]) + ")");
    }
    units.push_back(std::move(u));
  }
  apply_class_scores(units, spec);
  return Population(std::move(units), spec.kind);
}

Population ingest_jsonl(std::string_view text, const LossSpec& spec, const IngestOptions& options,
                        const std::string& source) {
  std::vector<Unit> units;
  std::unordered_map<std::string, std::size_t> seen;
  Eigen::Index dim = -1;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = source + ": line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("id")) throw ParseError(where + ": expected an object with an 'id'");
    Unit u;
    try {
      u.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
      if (j.contains(options.proxy_column)) {
        u.proxy = j[options.proxy_column].get<double>();
      } else if (spec.class_scores.empty()) {
        throw ParseError(where + ": missing '" + options.proxy_column + "'");
      }
      if (j.contains("proxy_sq") && !j["proxy_sq"].is_null()) u.proxy_sq = j["proxy_sq"].get<double>();
      if (j.contains("loss") && !j["loss"].is_null()) u.loss = j["loss"].get<double>();
      if (j.contains("embedding") && !j["embedding"].is_null()) {
        auto v = j["embedding"].get<std::vector<double>>();
        u.embedding = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
      }
    } catch (const json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (dim < 0) dim = u.embedding.size();
    if (u.embedding.size() != dim) throw ConsistencyError(where + ": embedding dimension mismatch");
    if (spec.class_scores.empty()) validate_unit(u, spec.kind, where);
    if (!seen.emplace(u.id, line_no).second) throw ConsistencyError(where + ": duplicate id '" + u.id + "'");
    units.push_back(std::move(u));
  }
  apply_class_scores(units, spec);
  return Population(std::move(units), spec.kind);
}

bool looks_like_jsonl(const std::string& path) {
  auto ends_with = [&](std::string_view suffix) {
    return path.size() >= suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  return ends_with(".jsonl") || ends_with(".ndjson");
}

}  // namespace

Population ingest_text(std::string_view text, bool jsonl, const LossSpec& spec, const IngestOptions& options,
                       const std::string& source_name) {
  return jsonl ? ingest_jsonl(text, spec, options, source_name) : ingest_csv(text, spec, options, source_name);
}

Population ingest(const std::string& path, const LossSpec& spec, const IngestOptions& options) {
  return ingest_text(csv::read_text(path), looks_like_jsonl(path), spec, options, path);
}

std::map<std::string, ClassScores> parse_class_scores(std::string_view text, const std::string& source_name) {
  std::map<std::string, ClassScores> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = source_name + ": line " + std::to_string(line_no);
    try {
      const json j = json::parse(line);
      ClassScores cs;
      const std::string id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
      cs.scores = j.at("scores").get<std::vector<double>>();
      check_probability_vector(cs.scores, where);
      if (j.contains("label") && !j["label"].is_null()) {
        const auto label = j["label"].get<long long>();
        if (label < 0 || static_cast<std::size_t>(label) >= cs.scores.size()) {
          throw PreconditionError(where + ": label out of range");
        }
        cs.label = static_cast<std::size_t>(label);
      }
      if (!out.emplace(id, std::move(cs)).second) throw ConsistencyError(where + ": duplicate id '" + id + "'");
    } catch (const json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return out;
}

std::map<std::string, ClassScores> read_class_scores(const std::string& path) {
  return parse_class_scores(csv::read_text(path), path);
}

std::string serialize_csv(const Population& pop) {
  const bool any_loss = std::any_of(pop.units().begin(), pop.units().end(),
                                    [](const Unit& u) { return u.loss.has_value(); });
  const bool any_sq = std::any_of(pop.units().begin(), pop.units().end(),
                                  [](const Unit& u) { return u.proxy_sq.has_value(); });
  std::string out = "id,proxy";
  if (any_sq) out += ",proxy_sq";
  if (any_loss) out += ",loss";
  for (Eigen::Index d = 0; d < pop.embedding_dim(); ++d) out += ",emb_" + std::to_string(d);
  out += '\n';
  for (const Unit& u : pop.units()) {
    out += csv::quote(u.id);
    out += ',' + csv::format_double(u.proxy);
    if (any_sq) out += ',' + (u.proxy_sq ? csv::format_double(*u.proxy_sq) : std::string());
    if (any_loss) out += ',' + (u.loss ? csv::format_double(*u.loss) : std::string());
    for (Eigen::Index d = 0; d < u.embedding.size(); ++d) out += ',' + csv::format_double(u.embedding[d]);
    out += '\n';
  }
  return out;
}

}  // namespace sseval
