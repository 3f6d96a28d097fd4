#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "idealband/annotation.hpp"
#include "idealband/assessor.hpp"
#include "idealband/data_io.hpp"
#include "idealband/estimation.hpp"
#include "idealband/model.hpp"
#include "idealband/random_forest.hpp"
#include "idealband/simulation.hpp"

namespace py = pybind11;
using namespace idealband;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Two-sided propensity and capability measurement core";
  m.attr("__version__") = "1.0.0";
  m.attr("DEFAULT_SEED") = kDefaultSeed;
  m.attr("MIN_RADIUS") = kMinRadius;

  // -- response model -------------------------------------------------------
  py::class_<CapabilityItem>(m, "CapabilityItem")
      .def(py::init<>())
      .def(py::init<double, double>(), py::arg("difficulty_b"),
           py::arg("discrimination_a") = 1.0)
      .def_readwrite("difficulty_b", &CapabilityItem::difficulty_b)
      .def_readwrite("discrimination_a", &CapabilityItem::discrimination_a);

  py::class_<PropensityWindow>(m, "PropensityWindow")
      .def(py::init<>())
      .def(py::init<std::optional<double>, std::optional<double>, double>(),
           py::arg("lower_bl"), py::arg("upper_bu"),
           py::arg("base_discrimination_a") = 1.0)
      .def_readwrite("lower_bl", &PropensityWindow::lower_bl)
      .def_readwrite("upper_bu", &PropensityWindow::upper_bu)
      .def_readwrite("base_discrimination_a",
                     &PropensityWindow::base_discrimination_a)
      .def("two_sided", &PropensityWindow::two_sided)
      .def("one_sided", &PropensityWindow::one_sided)
      .def("radius", &PropensityWindow::radius)
      .def("midpoint", &PropensityWindow::midpoint)
      .def("validate", &PropensityWindow::validate);

  py::class_<ResponseParams>(m, "ResponseParams")
      .def_readonly("adjusted_slope", &ResponseParams::adjusted_slope)
      .def_readonly("normalization", &ResponseParams::normalization);

  m.def("sigmoid", &sigmoid, py::arg("x"));
  m.def("p_capability", &p_capability, py::arg("theta"), py::arg("item"));
  m.def("derive_params", &derive_params, py::arg("window"));
  m.def("p_propensity", &p_propensity, py::arg("theta"), py::arg("window"));
  m.def("p_propensity_unnormalized", &p_propensity_unnormalized,
        py::arg("theta"), py::arg("window"), py::arg("slope_lower"),
        py::arg("slope_upper"));
  m.def("boundary_probability", &boundary_probability, py::arg("window"));

  // -- estimation -------------------------------------------------------------
  py::class_<OutcomeRecord>(m, "OutcomeRecord")
      .def(py::init<>())
      .def(py::init<std::string, int>(), py::arg("item_id"), py::arg("success"))
      .def_readwrite("item_id", &OutcomeRecord::item_id)
      .def_readwrite("success", &OutcomeRecord::success);

  py::class_<FitConfig>(m, "FitConfig")
      .def(py::init<>())
      .def_readwrite("theta_min", &FitConfig::theta_min)
      .def_readwrite("theta_max", &FitConfig::theta_max)
      .def_readwrite("grid_step", &FitConfig::grid_step)
      .def_readwrite("tolerance", &FitConfig::tolerance)
      .def_readwrite("max_iterations", &FitConfig::max_iterations)
      .def_readwrite("clamp_eps", &FitConfig::clamp_eps);

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("theta_hat", &FitResult::theta_hat)
      .def_readonly("std_error", &FitResult::std_error)
      .def_readonly("log_likelihood", &FitResult::log_likelihood)
      .def_readonly("n_items", &FitResult::n_items)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("at_bound", &FitResult::at_bound)
      .def_readonly("init_theta", &FitResult::init_theta);

  using Windows = std::vector<PropensityWindow>;
  using CapItems = std::vector<CapabilityItem>;
  using Outcomes = std::vector<OutcomeRecord>;

  m.def("log_likelihood",
        py::overload_cast<double, const Windows&, const Outcomes&,
                          const FitConfig&>(&log_likelihood),
        py::arg("theta"), py::arg("items"), py::arg("outcomes"),
        py::arg("config") = FitConfig{});
  m.def("log_likelihood",
        py::overload_cast<double, const CapItems&, const Outcomes&,
                          const FitConfig&>(&log_likelihood),
        py::arg("theta"), py::arg("items"), py::arg("outcomes"),
        py::arg("config") = FitConfig{});
  m.def("initialize_theta",
        py::overload_cast<const Windows&, const Outcomes&, const FitConfig&>(
            &initialize_theta),
        py::arg("items"), py::arg("outcomes"), py::arg("config") = FitConfig{});
  m.def("initialize_theta",
        py::overload_cast<const CapItems&, const Outcomes&, const FitConfig&>(
            &initialize_theta),
        py::arg("items"), py::arg("outcomes"), py::arg("config") = FitConfig{});
  m.def("fit_propensity", &fit_propensity, py::arg("items"),
        py::arg("outcomes"), py::arg("config") = FitConfig{});
  m.def("fit_capability", &fit_capability, py::arg("items"),
        py::arg("outcomes"), py::arg("config") = FitConfig{});
  m.def("empirical_point_collapse", &empirical_point_collapse,
        py::arg("items"), py::arg("outcomes"), py::arg("x"));
  m.def("empirical_surface", &empirical_surface, py::arg("items"),
        py::arg("outcomes"));
  m.def("empirical_icc", &empirical_icc, py::arg("items"), py::arg("outcomes"));

  // -- simulation ---------------------------------------------------------------
  py::class_<WindowDistribution>(m, "WindowDistribution")
      .def(py::init<>())
      .def_readwrite("support_min", &WindowDistribution::support_min)
      .def_readwrite("support_max", &WindowDistribution::support_max)
      .def_readwrite("discrimination_a", &WindowDistribution::discrimination_a)
      .def_readwrite("n_items", &WindowDistribution::n_items)
      .def_readwrite("seed", &WindowDistribution::seed);

  m.def("sample_windows", &sample_windows, py::arg("dist"));
  m.def("simulate_outcomes",
        py::overload_cast<double, const Windows&, std::uint64_t>(
            &simulate_outcomes),
        py::arg("true_theta"), py::arg("items"), py::arg("seed"));
  m.def("simulate_outcomes",
        py::overload_cast<double, const CapItems&, std::uint64_t>(
            &simulate_outcomes),
        py::arg("true_theta"), py::arg("items"), py::arg("seed"));

  py::class_<RecoveryConfig>(m, "RecoveryConfig")
      .def(py::init<>())
      .def_readwrite("true_theta", &RecoveryConfig::true_theta)
      .def_readwrite("windows", &RecoveryConfig::windows)
      .def_readwrite("n_seeds", &RecoveryConfig::n_seeds)
      .def_readwrite("base_seed", &RecoveryConfig::base_seed)
      .def_readwrite("fit", &RecoveryConfig::fit);

  py::class_<SeedResult>(m, "SeedResult")
      .def_readonly("seed_index", &SeedResult::seed_index)
      .def_readonly("theta_mle", &SeedResult::theta_mle)
      .def_readonly("mle_abs_error", &SeedResult::mle_abs_error)
      .def_readonly("collapse_peak", &SeedResult::collapse_peak)
      .def_readonly("collapse_abs_error", &SeedResult::collapse_abs_error)
      .def_readonly("std_error", &SeedResult::std_error)
      .def_readonly("converged", &SeedResult::converged);

  py::class_<RecoverySummary>(m, "RecoverySummary")
      .def_readonly("per_seed", &RecoverySummary::per_seed)
      .def_readonly("median_mle_abs_error",
                    &RecoverySummary::median_mle_abs_error)
      .def_readonly("median_collapse_abs_error",
                    &RecoverySummary::median_collapse_abs_error);

  m.def("recovery_experiment", &recovery_experiment, py::arg("config"));

  py::class_<TheoremCheck>(m, "TheoremCheck")
      .def_readonly("name", &TheoremCheck::name)
      .def_readonly("passed", &TheoremCheck::passed)
      .def_readonly("worst_deviation", &TheoremCheck::worst_deviation)
      .def_readonly("tolerance", &TheoremCheck::tolerance)
      .def_readonly("detail", &TheoremCheck::detail);

  py::class_<TheoremReport>(m, "TheoremReport")
      .def_readonly("checks", &TheoremReport::checks)
      .def_readonly("all_passed", &TheoremReport::all_passed);

  py::class_<ValidationOptions>(m, "ValidationOptions")
      .def(py::init<>())
      .def_readwrite("draws", &ValidationOptions::draws)
      .def_readwrite("seed", &ValidationOptions::seed)
      .def_readwrite("inject_fault", &ValidationOptions::inject_fault);

  m.def("validate_theorems", &validate_theorems,
        py::arg("options") = ValidationOptions{});

  // -- assessor -------------------------------------------------------------
  py::class_<ForestConfig>(m, "ForestConfig")
      .def(py::init<>())
      .def_readwrite("n_trees", &ForestConfig::n_trees)
      .def_readwrite("min_samples_split", &ForestConfig::min_samples_split)
      .def_readwrite("seed", &ForestConfig::seed);

  py::class_<RandomForest>(m, "RandomForest")
      .def_static("train", &RandomForest::train, py::arg("features"),
                  py::arg("labels"), py::arg("config") = ForestConfig{})
      .def("predict_proba", &RandomForest::predict_proba, py::arg("x"))
      .def_property_readonly("n_features", &RandomForest::n_features);

  py::enum_<FeatureSet>(m, "FeatureSet")
      .value("CapsOnly", FeatureSet::CapsOnly)
      .value("CapsPlusUltracrep", FeatureSet::CapsPlusUltracrep)
      .value("CapsPlusAll", FeatureSet::CapsPlusAll);

  py::class_<InstanceFeatures>(m, "InstanceFeatures")
      .def(py::init<>())
      .def_readwrite("id", &InstanceFeatures::id)
      .def_readwrite("capability_demands", &InstanceFeatures::capability_demands)
      .def_readwrite("propensity_windows", &InstanceFeatures::propensity_windows)
      .def_readwrite("label", &InstanceFeatures::label);

  py::class_<AssessorConfig>(m, "AssessorConfig")
      .def(py::init<>())
      .def_readwrite("feature_set", &AssessorConfig::feature_set)
      .def_readwrite("n_folds", &AssessorConfig::n_folds)
      .def_readwrite("forest", &AssessorConfig::forest)
      .def_readwrite("seed", &AssessorConfig::seed);

  py::class_<CvResult>(m, "CvResult")
      .def_readonly("fold_aurocs", &CvResult::fold_aurocs)
      .def_readonly("mean_auroc", &CvResult::mean_auroc);

  m.def("window_feature", &window_feature, py::arg("window"));
  m.def("featurize", &featurize, py::arg("instance"), py::arg("feature_set"));
  m.def("auroc", &auroc, py::arg("scores"), py::arg("labels"));
  m.def("stratified_folds", &stratified_folds, py::arg("labels"),
        py::arg("n_folds"), py::arg("seed"));
  m.def("cross_validated_auroc", &cross_validated_auroc, py::arg("instances"),
        py::arg("config"));
  m.def("compare_feature_sets", &compare_feature_sets, py::arg("instances"),
        py::arg("config"));

  // -- annotation ----------------------------------------------------------
  py::class_<AnnotationRequest>(m, "AnnotationRequest")
      .def(py::init<>())
      .def_readwrite("propensity_name", &AnnotationRequest::propensity_name)
      .def_readwrite("rubric_text", &AnnotationRequest::rubric_text)
      .def_readwrite("question_text", &AnnotationRequest::question_text)
      .def_readwrite("model_name", &AnnotationRequest::model_name)
      .def_readwrite("endpoint", &AnnotationRequest::endpoint)
      .def_readwrite("temperature", &AnnotationRequest::temperature);

  py::class_<Prompt>(m, "Prompt")
      .def_readonly("system_text", &Prompt::system_text)
      .def_readonly("user_text", &Prompt::user_text);

  m.def("build_prompt", &build_prompt, py::arg("request"));
  m.def("parse_interval", &parse_interval, py::arg("response_text"));
}
