#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "xview/error.hpp"
#include "xview/experiment.hpp"
#include "xview/synth.hpp"

namespace py = pybind11;
using namespace xview;

namespace {

SynthConfig make_synth_config(int action_count, int videos_per_action,
                              int clips_per_video, int latent_dim, int feature_dim,
                              double noise_sigma, const std::string& coupling,
                              std::uint64_t seed) {
  SynthConfig c;
  c.action_count = action_count;
  c.videos_per_action = videos_per_action;
  c.clips_per_video = clips_per_video;
  c.latent_dim = latent_dim;
  c.feature_dim = feature_dim;
  c.noise_sigma = noise_sigma;
  c.coupling = coupling == "nonlinear" ? SynthConfig::Coupling::nonlinear
                                       : SynthConfig::Coupling::linear;
  c.seed = seed;
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_xview, m) {
  m.doc() = "cross-view motion mapping: regression, nets, retrieval evaluation";

  py::register_exception<Error>(m, "XviewError");

  py::enum_<FeatureKind>(m, "FeatureKind")
      .value("hoof32", FeatureKind::hoof32)
      .value("c3d4096", FeatureKind::c3d4096)
      .value("c3d128", FeatureKind::c3d128);

  py::enum_<Metric>(m, "Metric")
      .value("euclidean", Metric::euclidean)
      .value("cosine", Metric::cosine);

  py::class_<MapperModel>(m, "MapperModel")
      .def_property_readonly("weights", [](const MapperModel& s) { return s.weights; })
      .def_property_readonly("lam", [](const MapperModel& s) { return s.lambda; })
      .def_property_readonly(
          "variant", [](const MapperModel& s) { return MapperModel::variant_name(s.variant); })
      .def("map", [](const MapperModel& s, const Eigen::MatrixXd& x) { return s.map(x); });

  m.def("fit_ols", &fit_ols, py::arg("x"), py::arg("y"), py::arg("with_bias") = false,
        "Closed-form least squares, rows are samples.");
  m.def("fit_ridge", &fit_ridge, py::arg("x"), py::arg("y"), py::arg("lam"),
        py::arg("with_bias") = false, "Closed-form L2-regularized least squares.");

  py::class_<TwoStreamScorer>(m, "TwoStreamScorer")
      .def("score",
           [](TwoStreamScorer& s, const Eigen::MatrixXd& src, const Eigen::MatrixXd& tgt) {
             return score_batch(s, src, tgt);
           })
      .def("score_pair",
           [](TwoStreamScorer& s, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
             return score_pair(s, a, b);
           });

  m.def("load_mapper", &load_mapper, py::arg("dir"));
  m.def("load_scorer", &load_scorer, py::arg("dir"));

  // HOOF from a stack of (u, v) flow fields: list of pairs of 2-D arrays.
  m.def(
      "hoof",
      [](const std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>>& fields,
         int bin_count) {
        FlowClip clip;
        clip.clip_id = "py";
        for (const auto& [u, v] : fields) {
          FlowField f(static_cast<int>(u.cols()), static_cast<int>(u.rows()));
          for (int y = 0; y < u.rows(); ++y)
            for (int x = 0; x < u.cols(); ++x) {
              f.u[f.idx(x, y)] = u(y, x);
              f.v[f.idx(x, y)] = v(y, x);
            }
          clip.fields.push_back(std::move(f));
        }
        return hoof(clip, bin_count);
      },
      py::arg("fields"), py::arg("bin_count") = 32,
      "Magnitude-weighted L1-normalized orientation histogram of a flow clip.");

  py::class_<PcaModel>(m, "PcaModel")
      .def_property_readonly("mean", [](const PcaModel& s) { return s.mean; })
      .def_property_readonly("components", [](const PcaModel& s) { return s.components; })
      .def_property_readonly("eigenvalues", [](const PcaModel& s) { return s.eigenvalues; });

  m.def(
      "pca_fit",
      [](const Eigen::MatrixXd& x, int out_dim) {
        std::vector<std::string> ids;
        for (int i = 0; i < x.rows(); ++i) ids.push_back(std::to_string(i));
        return pca_fit(FeatureMatrix::from_rows(FeatureKind::c3d4096, std::move(ids),
                                                Eigen::MatrixXd(x)),
                       out_dim);
      },
      py::arg("x"), py::arg("out_dim") = 128);
  m.def(
      "pca_apply",
      [](const PcaModel& model, const Eigen::MatrixXd& x) {
        std::vector<std::string> ids;
        for (int i = 0; i < x.rows(); ++i) ids.push_back(std::to_string(i));
        return Eigen::MatrixXd(
            pca_apply(model, FeatureMatrix::from_rows(FeatureKind::c3d4096, std::move(ids),
                                                      Eigen::MatrixXd(x)))
                .data());
      },
      py::arg("model"), py::arg("x"));

  m.def(
      "rank_gallery",
      [](const MapperModel& mapper, const Eigen::VectorXd& query,
         const Eigen::MatrixXd& gallery, int truth_row, Metric metric) {
        return rank_gallery_mapped(mapper, query, gallery, truth_row, metric).rank;
      },
      py::arg("mapper"), py::arg("query"), py::arg("gallery"), py::arg("truth_row"),
      py::arg("metric") = Metric::euclidean,
      "1-based pessimistic rank of the ground-truth gallery row.");
  m.def(
      "cmc",
      [](const std::vector<int>& ranks, int gallery_size) {
        std::vector<RankingResult> results;
        for (int r : ranks) results.push_back({"", r, gallery_size});
        return cmc(results);
      },
      py::arg("ranks"), py::arg("gallery_size"));
  m.def("auc", &auc, py::arg("curve"), "100 * mean of the CMC curve.");
  m.def("random_baseline_auc", &random_baseline_auc, py::arg("gallery_size"));

  m.def(
      "generate_feature_pairs",
      [](int action_count, int videos_per_action, int clips_per_video, int latent_dim,
         int feature_dim, double noise_sigma, const std::string& coupling,
         std::uint64_t seed) {
        const SynthFeatureData data = generate_feature_pairs(
            make_synth_config(action_count, videos_per_action, clips_per_video,
                              latent_dim, feature_dim, noise_sigma, coupling, seed));
        // (ego_matrix, exo_matrix), row i of each is the i-th aligned pair.
        const auto& d = data.dataset;
        Eigen::MatrixXd ego(static_cast<Eigen::Index>(d.pairs.size()), feature_dim);
        Eigen::MatrixXd exo(static_cast<Eigen::Index>(d.pairs.size()), feature_dim);
        for (std::size_t i = 0; i < d.pairs.size(); ++i) {
          ego.row(static_cast<Eigen::Index>(i)) = data.features.row(d.pairs[i].ego).transpose();
          exo.row(static_cast<Eigen::Index>(i)) = data.features.row(d.pairs[i].exo).transpose();
        }
        return std::make_pair(ego, exo);
      },
      py::arg("action_count") = 7, py::arg("videos_per_action") = 4,
      py::arg("clips_per_video") = 5, py::arg("latent_dim") = 8,
      py::arg("feature_dim") = 32, py::arg("noise_sigma") = 0.1,
      py::arg("coupling") = "linear", py::arg("seed") = 0,
      "Aligned (ego, exo) feature matrices from the seeded generator.");

  m.def(
      "run_synthetic_experiment",
      [](int action_count, int videos_per_action, int clips_per_video, double noise_sigma,
         const std::string& coupling, std::uint64_t seed,
         const std::vector<std::string>& models, int train_count, int val_count,
         int test_count, int max_epochs) {
        SynthConfig c = make_synth_config(action_count, videos_per_action, clips_per_video,
                                          8, 32, noise_sigma, coupling, seed);
        SynthFeatureData data = generate_feature_pairs(c);
        split_dataset(data.dataset, {train_count, val_count, test_count}, seed);
        ExperimentConfig config;
        if (!models.empty()) config.models = models;
        config.train.seed = seed;
        config.train.max_epochs = max_epochs;
        const Report report = run_experiment(config, data.dataset, data.features);
        py::dict out;
        for (const auto& row : report.rows) {
          py::dict per_model;
          for (const auto& [model, value] : row.auc) per_model[model.c_str()] = value;
          out[to_string(row.direction).c_str()] = per_model;
        }
        return out;
      },
      py::arg("action_count") = 4, py::arg("videos_per_action") = 16,
      py::arg("clips_per_video") = 2, py::arg("noise_sigma") = 0.1,
      py::arg("coupling") = "linear", py::arg("seed") = 0,
      py::arg("models") = std::vector<std::string>{"random", "uniform", "ols"},
      py::arg("train_count") = 48, py::arg("val_count") = 8, py::arg("test_count") = 8,
      py::arg("max_epochs") = 10,
      "Full directions x models experiment on generated data; AUC per cell.");
}
