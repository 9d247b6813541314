// Python bindings for the core operations: series generation, encoder
// training and encoding, detection scoring with threshold sweeps, margin F1,
// MMD statistics and the certification reports.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "sncpd/certify.hpp"
#include "sncpd/data.hpp"
#include "sncpd/detector.hpp"
#include "sncpd/encoders.hpp"
#include "sncpd/selfsup.hpp"
#include "sncpd/statistics.hpp"

namespace py = pybind11;
using namespace sncpd;

namespace {

using CArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<double> mat_to_array(const Mat& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::memcpy(out.mutable_data(), m.values().data(), sizeof(double) * m.size());
  return out;
}

Mat array_to_mat(const CArray& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
  Mat m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::memcpy(m.values().data(), a.data(), sizeof(double) * m.size());
  return m;
}

Statistic parse_statistic(const std::string& name) {
  if (name == "cos") return Statistic::Cosine;
  if (name == "mmd") return Statistic::Mmd;
  throw std::invalid_argument("statistic must be 'cos' or 'mmd', got '" + name + "'");
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw std::invalid_argument("activation must be 'relu' or 'sigmoid', got '" +
                              name + "'");
}

Objective parse_objective(const std::string& name) {
  if (name == "contrastive") return Objective::Contrastive;
  if (name == "bootstrap") return Objective::Bootstrap;
  throw std::invalid_argument("objective must be 'contrastive' or 'bootstrap', got '" +
                              name + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "capped encoders and change point detection";

  py::class_<TimeSeries>(m, "TimeSeries")
      .def_property_readonly("values",
                             [](const TimeSeries& s) { return mat_to_array(s.values); })
      .def_readonly("change_points", &TimeSeries::change_points)
      .def_readonly("name", &TimeSeries::name)
      .def("__len__", [](const TimeSeries& s) { return s.length(); });

  py::class_<SplitSeries>(m, "SplitSeries")
      .def_readonly("train", &SplitSeries::train)
      .def_readonly("val", &SplitSeries::val)
      .def_readonly("test", &SplitSeries::test);

  m.def(
      "evenly_spaced_change_points",
      [](std::size_t length, std::size_t count) {
        return evenly_spaced_change_points(length, count);
      },
      py::arg("length"), py::arg("count"));

  m.def(
      "make_mean_shift_series",
      [](std::size_t dims, std::size_t length,
         const std::vector<std::size_t>& change_points, double delta,
         double noise, std::uint64_t seed) {
        return make_mean_shift_series(dims, length, change_points, delta, noise, seed);
      },
      py::arg("dims"), py::arg("length"), py::arg("change_points"),
      py::arg("delta") = 1.5, py::arg("noise") = 1.0, py::arg("seed") = 0);

  m.def(
      "make_elliptical_series",
      [](std::size_t dims, std::size_t length,
         const std::vector<std::size_t>& change_points, double spread,
         double dof, std::uint64_t seed) {
        return make_elliptical_series(dims, length, change_points, spread, dof, seed);
      },
      py::arg("dims"), py::arg("length"), py::arg("change_points"),
      py::arg("spread") = 1.5, py::arg("dof") = 5.0, py::arg("seed") = 0);

  m.def(
      "split_series",
      [](const TimeSeries& s, double train, double val, double test) {
        return split_series(s, {train, val, test});
      },
      py::arg("series"), py::arg("train") = 0.6, py::arg("val") = 0.2,
      py::arg("test") = 0.2);

  m.def("load_series_csv", &load_series_csv, py::arg("path"));
  m.def("save_series_csv", &save_series_csv, py::arg("series"), py::arg("path"));

  py::class_<EncoderSpec>(m, "EncoderSpec");
  m.def(
      "encoder_spec",
      [](std::size_t input_dim, std::size_t hidden_dim, std::size_t code_dim,
         std::size_t depth, const std::string& block, std::size_t kernel,
         const std::string& activation, double dropout, bool spectral_norm,
         double cap, bool identity_input, bool identity_head) {
        EncoderSpec spec;
        spec.input_dim = input_dim;
        spec.hidden_dim = hidden_dim;
        spec.code_dim = code_dim;
        spec.spectral_norm = spectral_norm;
        spec.cap = cap;
        spec.identity_input = identity_input;
        spec.identity_head = identity_head;
        spec.blocks.resize(depth);
        for (std::size_t l = 0; l < depth; ++l) {
          BlockSpec& b = spec.blocks[l];
          b.kind = block == "dense" ? BlockKind::Dense : BlockKind::Conv;
          b.activation = parse_activation(activation);
          b.kernel = kernel;
          b.dilation = std::size_t{1} << (l % 4);
          b.dropout = dropout;
        }
        spec.validate();
        return spec;
      },
      py::arg("input_dim"), py::arg("hidden_dim") = 32, py::arg("code_dim") = 16,
      py::arg("depth") = 8, py::arg("block") = "conv", py::arg("kernel") = 3,
      py::arg("activation") = "relu", py::arg("dropout") = 0.0,
      py::arg("spectral_norm") = true, py::arg("cap") = 0.9,
      py::arg("identity_input") = false, py::arg("identity_head") = false);

  py::class_<EncoderModel>(m, "Encoder")
      .def_static("init", &EncoderModel::init, py::arg("spec"), py::arg("seed") = 0)
      .def_static("load", &EncoderModel::load, py::arg("path"))
      .def("save", &EncoderModel::save, py::arg("path"))
      .def(
          "encode_sequence",
          [](const EncoderModel& e, const CArray& x) {
            return mat_to_array(e.encode_sequence_values(array_to_mat(x)));
          },
          py::arg("values"))
      .def(
          "encode_vector",
          [](const EncoderModel& e, const CArray& x) {
            return e.encode_vector_values(array_to_mat(x));
          },
          py::arg("values"))
      .def("layer_norms", &EncoderModel::layer_norms);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("model", &TrainResult::model)
      .def_readonly("train_loss", &TrainResult::train_loss)
      .def_readonly("val_loss", &TrainResult::val_loss)
      .def_readonly("val_steps", &TrainResult::val_steps)
      .def_readonly("best_val", &TrainResult::best_val)
      .def_readonly("best_step", &TrainResult::best_step);

  m.def(
      "train_encoder",
      [](const EncoderSpec& spec, const CArray& train, const CArray& val,
         const std::string& objective, std::size_t steps, std::size_t batch,
         std::size_t window, std::size_t min_overlap, double lr,
         std::uint64_t seed, std::size_t val_every, std::size_t val_batches,
         double ema, std::size_t head_hidden, std::size_t head_dim) {
        TrainOptions opt;
        opt.objective = parse_objective(objective);
        opt.steps = steps;
        opt.batch = batch;
        opt.window = window;
        opt.min_overlap = min_overlap;
        opt.lr = lr;
        opt.seed = seed;
        opt.val_every = val_every;
        opt.val_batches = val_batches;
        opt.ema_decay = ema;
        opt.head_hidden = head_hidden;
        opt.head_dim = head_dim;
        return train_encoder(spec, array_to_mat(train), array_to_mat(val), opt);
      },
      py::arg("spec"), py::arg("train"), py::arg("val"),
      py::arg("objective") = "contrastive", py::arg("steps") = 300,
      py::arg("batch") = 8, py::arg("window") = 64, py::arg("min_overlap") = 2,
      py::arg("lr") = 1e-3, py::arg("seed") = 0, py::arg("val_every") = 25,
      py::arg("val_batches") = 4, py::arg("ema") = 0.996,
      py::arg("head_hidden") = 64, py::arg("head_dim") = 16);

  py::class_<DetectionTrace>(m, "DetectionTrace")
      .def_readonly("index", &DetectionTrace::index)
      .def_readonly("statistic", &DetectionTrace::statistic)
      .def_readwrite("threshold", &DetectionTrace::threshold)
      .def_readonly("sigma", &DetectionTrace::sigma)
      .def_readonly("window", &DetectionTrace::window)
      .def_readonly("stride", &DetectionTrace::stride)
      .def("alarm_indices", &DetectionTrace::alarm_indices);

  m.def(
      "score_series",
      [](const EncoderModel& encoder, const CArray& values, std::size_t window,
         std::size_t stride, const std::string& statistic, double mmd_sigma,
         std::uint64_t seed) {
        ScoreOptions opt;
        opt.statistic = parse_statistic(statistic);
        opt.mmd_sigma = mmd_sigma;
        opt.seed = seed;
        return score_pairs(make_window_pairs(array_to_mat(values), window, stride),
                           &encoder, opt);
      },
      py::arg("encoder"), py::arg("values"), py::arg("window") = 50,
      py::arg("stride") = 1, py::arg("statistic") = "cos",
      py::arg("mmd_sigma") = 0.0, py::arg("seed") = 0);

  py::class_<F1Report>(m, "F1Report")
      .def_readonly("true_positives", &F1Report::true_positives)
      .def_readonly("false_positives", &F1Report::false_positives)
      .def_readonly("false_negatives", &F1Report::false_negatives)
      .def_readonly("precision", &F1Report::precision)
      .def_readonly("recall", &F1Report::recall)
      .def_readonly("f1", &F1Report::f1)
      .def_readonly("margin", &F1Report::margin);

  py::class_<SweepResult>(m, "SweepResult")
      .def_readonly("threshold", &SweepResult::threshold)
      .def_readonly("report", &SweepResult::report)
      .def_readonly("candidates", &SweepResult::candidates);

  m.def(
      "margin_f1",
      [](const std::vector<std::size_t>& alarms,
         const std::vector<std::size_t>& change_points, std::size_t margin,
         std::size_t run_gap) {
        return margin_f1(alarms, change_points, margin, run_gap);
      },
      py::arg("alarms"), py::arg("change_points"), py::arg("margin"),
      py::arg("run_gap") = 1);

  m.def(
      "threshold_sweep",
      [](const DetectionTrace& trace, const std::vector<std::size_t>& change_points,
         std::size_t margin) { return threshold_sweep(trace, change_points, margin); },
      py::arg("trace"), py::arg("change_points"), py::arg("margin"));

  m.def(
      "mmd2_biased",
      [](const CArray& x, const CArray& y, double sigma) {
        return mmd2_biased(array_to_mat(x), array_to_mat(y), sigma);
      },
      py::arg("x"), py::arg("y"), py::arg("sigma"));

  m.def(
      "median_heuristic_sigma",
      [](const CArray& x, std::size_t max_points, std::uint64_t seed) {
        return median_heuristic_sigma(array_to_mat(x), max_points, seed);
      },
      py::arg("x"), py::arg("max_points") = 256, py::arg("seed") = 0);

  py::class_<CertificationReport>(m, "CertificationReport")
      .def_readonly("cap", &CertificationReport::cap)
      .def_readonly("layer_norms", &CertificationReport::layer_norms)
      .def_readonly("max_layer_norm", &CertificationReport::max_layer_norm)
      .def_readonly("cap_ok", &CertificationReport::cap_ok)
      .def_readonly("alpha", &CertificationReport::alpha)
      .def_readonly("l1_total", &CertificationReport::l1_total)
      .def_readonly("l2_total", &CertificationReport::l2_total)
      .def_readonly("pairs", &CertificationReport::pairs)
      .def_readonly("ratio_min", &CertificationReport::ratio_min)
      .def_readonly("ratio_max", &CertificationReport::ratio_max)
      .def_readonly("band_ok", &CertificationReport::band_ok)
      .def("passed", &CertificationReport::passed)
      .def("to_kv", &CertificationReport::to_kv);

  m.def(
      "certify",
      [](const EncoderModel& encoder, std::size_t pairs, std::size_t probe_rows,
         std::uint64_t seed, double cap_slack) {
        CertifyOptions opt;
        opt.pairs = pairs;
        opt.probe_rows = probe_rows;
        opt.seed = seed;
        opt.cap_slack = cap_slack;
        return certify_bilipschitz(encoder, opt);
      },
      py::arg("encoder"), py::arg("pairs") = 1000, py::arg("probe_rows") = 1,
      py::arg("seed") = 0, py::arg("cap_slack") = 1e-4);

  m.def(
      "invert_encoder",
      [](const EncoderModel& encoder, const CArray& codes, int max_iterations,
         double tol) {
        const InvertResult r =
            invert_encoder(encoder, array_to_mat(codes), {max_iterations, tol});
        return py::make_tuple(mat_to_array(r.x), r.iterations, r.residual);
      },
      py::arg("encoder"), py::arg("codes"), py::arg("max_iterations") = 200,
      py::arg("tol") = 1e-10);
}
