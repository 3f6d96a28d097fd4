#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "idealband/annotation.hpp"
#include "idealband/assessor.hpp"
#include "idealband/estimation.hpp"
#include "idealband/model.hpp"

namespace idealband {

// All readers are line-delimited JSON (one record per line, blank lines
// ignored); every schema failure carries its 1-based line number and field.
// All writers are deterministic (fixed field/column order, no timestamps)
// and atomic (write temp, then rename).

struct ItemMetadata {
  std::string dataset;
  std::string propensity_name;
  std::optional<std::string> question_text;
};

enum class ItemKind { Capability, Propensity };

struct ItemRecord {
  std::string id;
  ItemKind kind = ItemKind::Capability;
  CapabilityItem capability;  // meaningful when kind == Capability
  PropensityWindow window;    // meaningful when kind == Propensity
  ItemMetadata metadata;
};

struct ItemBank {
  std::vector<ItemRecord> items;
  std::unordered_map<std::string, std::size_t> index;  // id -> position

  const ItemRecord* find(const std::string& id) const {
    const auto it = index.find(id);
    return it == index.end() ? nullptr : &items[it->second];
  }
};

/// Record shape: {id, kind: "capability"|"propensity", b | (b_l, b_u), a,
/// metadata?{dataset, propensity_name, question_text?}}.  Infinite window
/// bounds are the literal tokens "-inf" / "+inf".
ItemBank load_item_bank(const std::filesystem::path& path);
void write_item_bank(const std::filesystem::path& path, const ItemBank& bank);

struct OutcomeRow {
  std::string agent_id;
  std::string item_id;
  int y = 0;
  std::optional<int> incitation_level;  // nullopt == unprompted
};

/// Record shape: {agent_id, item_id, y, incitation_level?: int in [-3,3] or
/// "unprompted"}.  Every item_id must resolve in the bank.
std::vector<OutcomeRow> load_outcomes(const std::filesystem::path& path,
                                      const ItemBank& bank);
void write_outcomes(const std::filesystem::path& path,
                    const std::vector<OutcomeRow>& rows);

/// Record shape: {id, capability_demands: [18 reals in 0..6],
/// propensity_windows: [4 pairs [lo, hi] with inf tokens allowed], y}.
std::vector<InstanceFeatures> load_instances(const std::filesystem::path& path);
void write_instances(const std::filesystem::path& path,
                     const std::vector<InstanceFeatures>& instances);

struct AnnotationRequestRow {
  std::string id;
  AnnotationRequest request;
};

/// Record shape: {id?, propensity_name, rubric?, question_text, model?,
/// endpoint?, temperature?}; missing fields fall back to the given defaults
/// (an absent rubric needs a non-empty default_rubric).  A missing id
/// defaults to the 0-based record index.
std::vector<AnnotationRequestRow> load_annotation_requests(
    const std::filesystem::path& path, const std::string& default_model,
    const std::string& default_endpoint, double default_temperature,
    const std::string& default_rubric = "");

/// Output rows {id, status, b_l?, b_u?}: bounds only when status is ok.
/// Deliberately excludes the cache flag and transport detail so reruns are
/// byte-identical.
void write_annotation_results(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, AnnotationResult>>& results);

// -- tab-separated plot/report exports ------------------------------------

/// Response curves for one window: theta, p_unnorm, p_naive_norm, p_final.
/// p_unnorm is the raw two-factor product at the base slope, p_naive_norm
/// rescales it by its own midpoint value, p_final is the shipped response.
/// One-sided windows have no midpoint: all three columns then equal the
/// monotone response.
void export_irc(const std::filesystem::path& path,
                const PropensityWindow& window, double theta_min,
                double theta_max, double step);

/// Analytic response surface at one theta: b_l, b_u, m, width, p per window
/// (window order preserved; "NA" midpoint/width for one-sided windows).
void export_surface(const std::filesystem::path& path,
                    const std::vector<PropensityWindow>& windows,
                    double theta);

/// Empirical surface: success fraction per distinct window, sorted by
/// bounds; same columns.
void export_surface(const std::filesystem::path& path,
                    const std::vector<PropensityWindow>& windows,
                    const std::vector<OutcomeRecord>& outcomes);

/// Pointwise collapse on an x grid: x, p_emp, n_cover ("NA", 0 on empty
/// cover).
void export_collapse(const std::filesystem::path& path,
                     const std::vector<PropensityWindow>& windows,
                     const std::vector<OutcomeRecord>& outcomes, double x_min,
                     double x_max, double step);

/// Feature-set comparison: feature_set, mean_auroc, fold_0..fold_{k-1}.
void export_comparison(
    const std::filesystem::path& path,
    const std::vector<std::pair<FeatureSet, CvResult>>& results);

struct FitReportRow {
  std::string agent_id;
  std::string dataset;
  std::optional<int> incitation_level;  // nullopt == unprompted
  FitResult fit;
};

/// One row per (agent, dataset, incitation) fit, sorted by that key with
/// unprompted before numeric levels; undefined std_error prints "NA".
void write_fit_report(const std::filesystem::path& path,
                      std::vector<FitReportRow> rows);

/// Shared atomic writer: writes to a sibling temp file, then renames into
/// place.  Creates parent directories as needed.  Throws IoError.
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content);

}  // namespace idealband
