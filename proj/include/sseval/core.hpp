#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sseval {

enum class LossKind { Accuracy, SquaredError, CrossEntropy };

std::string_view to_string(LossKind kind);
LossKind loss_kind_from_string(std::string_view name);

/// Probabilities below this are clamped before taking logs.
inline constexpr double kLogFloor = 1e-12;

/// One evaluation item: proxy score, and the loss once it has been annotated.
struct Unit {
  std::string id;
  double proxy = 0.0;
  /// Plug-in E[Z^2 | X]; only set when class scores were supplied.
  std::optional<double> proxy_sq;
  std::optional<double> loss;
  /// Empty when the dataset carries no embeddings.
  Eigen::VectorXd embedding;
};

/// The finite evaluation dataset. Immutable once constructed; unit order is
/// the file order and every downstream operation is stable with respect to it.
class Population {
 public:
  Population(std::vector<Unit> units, LossKind kind);

  std::size_t size() const noexcept { return units_.size(); }
  LossKind loss_kind() const noexcept { return kind_; }
  const std::vector<Unit>& units() const noexcept { return units_; }
  const Unit& operator[](std::size_t i) const { return units_[i]; }

  std::optional<std::size_t> index_of(std::string_view id) const;

  Eigen::VectorXd proxies() const;
  /// E[Z^2|X] plug-in per unit; for accuracy losses Z^2 = Z so this is the proxy.
  Eigen::VectorXd proxy_second_moments() const;
  /// Throws PreconditionError when any loss is absent.
  Eigen::VectorXd losses() const;
  bool fully_labelled() const noexcept;
  bool has_embeddings() const noexcept { return embedding_dim_ > 0; }
  Eigen::Index embedding_dim() const noexcept { return embedding_dim_; }
  /// N x d matrix, one row per unit.
  Eigen::MatrixXd embeddings() const;

  /// Finite-population mean loss; requires every loss.
  double finite_mean() const;

  /// Sub-population of the given unit positions, in the given order.
  Population subset(std::span<const std::size_t> positions) const;

 private:
  std::vector<Unit> units_;
  LossKind kind_;
  Eigen::Index embedding_dim_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Class-probability sidecar entry for one unit.
struct ClassScores {
  std::optional<std::size_t> label;
  std::vector<double> scores;
};

struct LossSpec {
  LossKind kind = LossKind::Accuracy;
  /// Keyed by unit id. When non-empty it supplies the proxy moments of every unit.
  std::map<std::string, ClassScores> class_scores;
};

struct IngestOptions {
  /// Column (CSV) or field (JSONL) read as the proxy.
  std::string proxy_column = "proxy";
};

/// Per-unit loss Z for a labelled prediction.
double eval_loss(LossKind kind, std::size_t label, std::span<const double> scores);

/// Plug-in (E[Z|X], E[Z^2|X]) under the model's own predictive distribution.
std::pair<double, double> conditional_moments(LossKind kind, std::span<const double> scores);

/// Validates a probability vector (nonnegative, sums to one within 1e-9).
void check_probability_vector(std::span<const double> scores, const std::string& where);

Population ingest(const std::string& path, const LossSpec& spec, const IngestOptions& options = {});
/// Parses CSV or JSONL text; `jsonl` selects the format.
Population ingest_text(std::string_view text, bool jsonl, const LossSpec& spec,
                       const IngestOptions& options = {}, const std::string& source_name = "<input>");

std::map<std::string, ClassScores> read_class_scores(const std::string& path);
std::map<std::string, ClassScores> parse_class_scores(std::string_view text,
                                                      const std::string& source_name = "<scores>");

/// Canonical CSV: id,proxy[,proxy_sq][,loss][,emb_0..]. Ingesting it back yields
/// an identical population.
std::string serialize_csv(const Population& pop);

}  // namespace sseval
