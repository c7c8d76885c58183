#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gsvin/checkpoint.hpp"
#include "gsvin/errors.hpp"
#include "gsvin/evaluation.hpp"
#include "gsvin/heuristic.hpp"
#include "gsvin/training.hpp"

namespace py = pybind11;
using namespace gsvin;

namespace {

nlohmann::json to_json_value(const py::handle& obj) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

template <class T>
T from_dict(const py::object& obj) {
  if (obj.is_none()) return T{};
  return to_json_value(obj).get<T>();
}

py::array_t<double> to_array(const Tensor& t) {
  const Shape s = t.shape();
  py::array_t<double> a({s.batch, s.channels, s.height, s.width});
  std::copy(t.data().begin(), t.data().end(), a.mutable_data());
  return a;
}

GridMap map_from_array(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& obstacles,
                       std::pair<int, int> goal) {
  if (obstacles.ndim() != 2) throw ValidationError("obstacle grid must be two-dimensional");
  GridMap map(static_cast<int>(obstacles.shape(0)), static_cast<int>(obstacles.shape(1)));
  for (std::size_t i = 0; i < map.cells(); ++i) map.set_obstacle(map.cell(i), obstacles.data()[i] != 0);
  map.set_goal({goal.first, goal.second});
  if (!map.in_bounds(map.goal())) throw ValidationError("goal outside the map");
  return map;
}

py::array_t<std::uint8_t> obstacle_array(const GridMap& map) {
  py::array_t<std::uint8_t> a({map.height(), map.width()});
  std::copy(map.obstacles().begin(), map.obstacles().end(), a.mutable_data());
  return a;
}

std::span<const PlanningSample> split_of(const Dataset& d, const std::string& split) {
  if (split == "train") return d.train;
  if (split == "test") return d.test;
  throw ValidationError("split must be 'train' or 'test'");
}

struct Model {
  ModelConfig config;
  TrainState state;
};

Model model_from_state(TrainState state) {
  const ModelConfig config = state.record.model;
  return {config, std::move(state)};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Grid path planning with value iteration networks";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_RuntimeError);
  py::register_exception<GenerationError>(m, "GenerationError", PyExc_RuntimeError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<MetricError>(m, "MetricError", PyExc_ArithmeticError);

  m.def("heuristic_k", &heuristic_k, py::arg("height"), py::arg("width"), py::arg("f"));
  m.def("scaled_k", &scaled_k, py::arg("height"), py::arg("width"), py::arg("f"), py::arg("k_prime"));

  py::class_<PlanningSample>(m, "Sample")
      .def_property_readonly("obstacles", [](const PlanningSample& s) { return obstacle_array(s.map); })
      .def_property_readonly("goal", [](const PlanningSample& s) { return std::pair(s.map.goal().row, s.map.goal().col); })
      .def_property_readonly("agent", [](const PlanningSample& s) { return std::pair(s.agent.row, s.agent.col); })
      .def_readonly("expert_action", &PlanningSample::expert_action)
      .def_readonly("optimal_length", &PlanningSample::optimal_length);

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("manifest", [](const Dataset& d) { return to_python(d.manifest); })
      .def_readonly("train", &Dataset::train)
      .def_readonly("test", &Dataset::test);

  m.def(
      "generate_dataset",
      [](const py::object& manifest, int workers) {
        const auto man = from_dict<DatasetManifest>(manifest);
        py::gil_scoped_release release;
        return generate_dataset(man, workers);
      },
      py::arg("manifest") = py::none(), py::arg("workers") = 1);
  m.def(
      "build_dataset",
      [](const py::object& manifest, const std::filesystem::path& out, int workers) {
        const auto man = from_dict<DatasetManifest>(manifest);
        py::gil_scoped_release release;
        return build_dataset(man, out, workers);
      },
      py::arg("manifest"), py::arg("out_dir"), py::arg("workers") = 1);
  m.def("load_dataset", &load_dataset_dir, py::arg("directory"));

  m.def(
      "astar_shortest",
      [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& obstacles, std::pair<int, int> goal,
         std::pair<int, int> start) -> py::object {
        const GridMap map = map_from_array(obstacles, goal);
        if (!map.free({start.first, start.second})) throw ValidationError("start cell is not free");
        const auto path = astar_shortest(map, {start.first, start.second});
        if (!path) return py::none();
        std::vector<std::pair<int, int>> cells;
        for (Cell c : path->path) cells.emplace_back(c.row, c.col);
        return py::make_tuple(path->length, cells);
      },
      py::arg("obstacles"), py::arg("goal"), py::arg("start"));

  m.def(
      "tabular_vi",
      [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& obstacles, std::pair<int, int> goal,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& reward, double gamma, int max_iters,
         double tol) {
        const GridMap map = map_from_array(obstacles, goal);
        if (static_cast<std::size_t>(reward.size()) != map.cells()) throw ShapeError("reward must match the map");
        ValueIterationOptions opt;
        opt.gamma = gamma;
        opt.max_iters = max_iters;
        opt.tol = tol;
        const auto r = tabular_vi(map, std::span<const double>(reward.data(), map.cells()), opt);
        py::array_t<double> v({map.height(), map.width()});
        std::copy(r.values.begin(), r.values.end(), v.mutable_data());
        return v;
      },
      py::arg("obstacles"), py::arg("goal"), py::arg("reward"), py::arg("gamma") = 0.9, py::arg("max_iters") = 1000,
      py::arg("tol") = 1e-9);

  m.def(
      "model_config",
      [](const std::string& variant, int height, int width, int f, double k_prime) {
        return to_python(ModelConfig::for_map(parse_variant(variant), height, width, f, k_prime));
      },
      py::arg("variant") = "GSVIN", py::arg("height") = 8, py::arg("width") = 8, py::arg("f") = 7,
      py::arg("k_prime") = 1.0);

  py::class_<Model>(m, "Model")
      .def(py::init([](const py::object& config, std::uint64_t seed) {
             const auto cfg = from_dict<ModelConfig>(config);
             TrainState s;
             s.params = init_params(cfg, seed);
             s.slots = zero_slots(s.params);
             s.record.model = cfg;
             return Model{cfg, std::move(s)};
           }),
           py::arg("config") = py::none(), py::arg("seed") = 0)
      .def_property_readonly("config", [](const Model& md) { return to_python(md.config); })
      .def_property_readonly("record", [](const Model& md) { return to_python(md.state.record); })
      .def_property_readonly("epochs_done", [](const Model& md) { return md.state.epochs_done; })
      .def_property_readonly("params",
                             [](const Model& md) {
                               py::dict d;
                               for (const auto& e : md.state.params.entries()) d[py::str(e.name)] = to_array(e.value);
                               return d;
                             })
      .def(
          "logits",
          [](const Model& md, const Dataset& data, const std::string& split) {
            const auto samples = split_of(data, split);
            const Batch batch = make_batch(samples);
            Tape tape;
            const ModelVars vars = bind_params(tape, md.config, md.state.params, false);
            return to_array(tape.value(forward(tape, md.config, vars, tape.constant(batch.input), batch.agents)))
                .reshape({static_cast<py::ssize_t>(samples.size()), static_cast<py::ssize_t>(kNumActions)});
          },
          py::arg("dataset"), py::arg("split") = "test")
      .def(
          "evaluate",
          [](const Model& md, const Dataset& data, const std::string& split, int step_budget) {
            EvalOptions opt;
            opt.step_budget = step_budget;
            EvalReport r;
            {
              py::gil_scoped_release release;
              r = evaluate(md.config, md.state.params, split_of(data, split), opt);
            }
            return to_python(r);
          },
          py::arg("dataset"), py::arg("split") = "test", py::arg("step_budget") = 0)
      .def("save", [](const Model& md, const std::filesystem::path& path) { save_checkpoint(path, md.state); },
           py::arg("path"));

  m.def(
      "train",
      [](const py::object& model, const Dataset& data, const py::object& train_config) {
        const auto mc = from_dict<ModelConfig>(model);
        const auto tc = from_dict<TrainConfig>(train_config);
        py::gil_scoped_release release;
        return Model{mc, train(mc, data, tc)};
      },
      py::arg("model"), py::arg("dataset"), py::arg("train") = py::none());

  m.def(
      "load_checkpoint", [](const std::filesystem::path& path) { return model_from_state(load_checkpoint(path)); },
      py::arg("path"));

  m.def(
      "oracle_report",
      [](const Dataset& data, const std::string& split) {
        return to_python(evaluate_policy(oracle_policy(), split_of(data, split)));
      },
      py::arg("dataset"), py::arg("split") = "test");
}
