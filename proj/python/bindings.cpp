#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include <nlohmann/json.hpp>

#include "xenav/dataset.hpp"
#include "xenav/embodiment.hpp"
#include "xenav/errors.hpp"
#include "xenav/harness.hpp"
#include "xenav/metrics.hpp"
#include "xenav/planner.hpp"
#include "xenav/scene.hpp"
#include "xenav/sim.hpp"

namespace py = pybind11;
using namespace xenav;

namespace {

// Values cross the boundary as JSON documents in their file-schema form.
py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::object& o)
{
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

template <typename T>
T from_py_as(const py::object& o)
{
    return from_py(o).get<T>();
}

Action action_from(const std::string& name)
{
    const auto a = parse_action(name);
    if (!a) {
        throw ArgumentError("unknown action: " + name);
    }
    return *a;
}

py::array_t<std::uint16_t> plane(const std::vector<std::uint16_t>& values, int height, int width)
{
    py::array_t<std::uint16_t> out({height, width});
    std::copy(values.begin(), values.end(), out.mutable_data());
    return out;
}

py::list observation_to_py(const Observation& obs)
{
    py::list cams;
    for (const Image& img : obs.images) {
        py::dict d;
        d["semantic"] = plane(img.semantic, img.height, img.width);
        d["depth"] = plane(img.depth, img.height, img.width);
        d["camera_index"] = img.camera_index;
        cams.append(d);
    }
    return cams;
}

py::dict pose_to_py(const Pose& p)
{
    py::dict d;
    d["x"] = p.x;
    d["z"] = p.z;
    d["heading"] = p.heading;
    return d;
}

struct PyEpisode
{
    ResolvedEpisode episode;
};

// Owns the scene and embodiment the borrowed SimState points into.
class Simulator
{
public:
    Simulator(const PyEpisode& ep, int render_size, double collision_penalty, bool render)
        : episode_(std::make_shared<ResolvedEpisode>(ep.episode))
    {
        options_ = eval_sim_options();
        options_.render_width = render_size;
        options_.render_height = render_size;
        options_.render_observations = render;
        task_ = episode_->spec.task;
        task_.collision_penalty = collision_penalty;
    }

    py::dict reset()
    {
        state_ = std::make_unique<SimState>(
            xenav::reset(episode_->scene, episode_->embodiment, episode_->spec.start, task_, options_));
        py::dict d;
        d["observation"] = observation_to_py(state_->observation);
        d["distance"] = state_->min_distance;
        d["pose"] = pose_to_py(state_->pose);
        return d;
    }

    py::dict step(const std::string& action)
    {
        if (!state_) {
            throw StateError("reset() must be called before step()");
        }
        const StepResult r = xenav::step(*state_, action_from(action));
        py::dict d;
        d["observation"] = observation_to_py(r.observation);
        d["reward"] = r.reward;
        d["collision"] = r.collision;
        d["terminal"] = r.terminal;
        d["success"] = r.success;
        d["distance"] = r.distance;
        d["pose"] = pose_to_py(state_->pose);
        return d;
    }

    int steps() const { return state_ ? state_->steps : 0; }
    int collisions() const { return state_ ? state_->collisions : 0; }

private:
    std::shared_ptr<ResolvedEpisode> episode_;
    SimOptions options_;
    TaskSpec task_;
    std::unique_ptr<SimState> state_;
};

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Embodiment-randomized indoor navigation simulator";

    static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
    py::register_exception<ArgumentError>(m, "ArgumentError", base.ptr());
    py::register_exception<RangeError>(m, "RangeError", base.ptr());
    py::register_exception<LookupError>(m, "LookupError", base.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<StateError>(m, "StateError", base.ptr());
    py::register_exception<PlacementError>(m, "PlacementError", base.ptr());
    py::register_exception<TaskError>(m, "TaskError", base.ptr());
    py::register_exception<UnreachableError>(m, "UnreachableError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<GenerationError>(m, "GenerationError", base.ptr());

    py::list actions;
    for (const Action a : kAllActions) {
        actions.append(std::string(action_name(a)));
    }
    m.attr("ACTIONS") = actions;
    m.attr("PRESETS") = py::cast(std::vector<std::string>(kPresetNames.begin(), kPresetNames.end()));

    m.def("default_ranges", [] { return to_py(SamplingRanges{}); });
    m.def(
        "sample_embodiment",
        [](std::uint64_t seed, const py::object& ranges) {
            const SamplingRanges r = ranges.is_none() ? SamplingRanges{} : from_py_as<SamplingRanges>(ranges);
            return to_py(sample_embodiment(seed, r));
        },
        py::arg("seed"), py::arg("ranges") = py::none());
    m.def("preset_embodiment", [](const std::string& name) { return to_py(preset_embodiment(name)); });
    m.def(
        "filter_ranges",
        [](const std::string& parameter, double lo, double hi, const py::object& ranges) {
            const SamplingRanges r = ranges.is_none() ? SamplingRanges{} : from_py_as<SamplingRanges>(ranges);
            return to_py(filter_ranges(r, parameter, {lo, hi}));
        },
        py::arg("parameter"), py::arg("lo"), py::arg("hi"), py::arg("ranges") = py::none());
    m.def("validate", [](const py::object& e) { return validate(from_py_as<EmbodimentConfig>(e)); });
    m.def("config_vector", [](const py::object& e) {
        const ConfigVector v = config_vector(from_py_as<EmbodimentConfig>(e));
        return std::vector<double>(v.begin(), v.end());
    });
    m.def("embodiment_distance", [](const py::object& a, const py::object& b) {
        return embodiment_distance(from_py_as<EmbodimentConfig>(a), from_py_as<EmbodimentConfig>(b));
    });

    py::class_<Scene>(m, "Scene")
        .def_property_readonly("seed", &Scene::seed)
        .def_property_readonly("bounds",
                               [](const Scene& s) {
                                   const Rect r = s.bounds();
                                   return py::make_tuple(r.x0, r.z0, r.x1, r.z1);
                               })
        .def_property_readonly("instances",
                               [](const Scene& s) {
                                   nlohmann::json j = nlohmann::json::array();
                                   for (const Instance& i : s.instances()) {
                                       j.push_back(i);
                                   }
                                   return to_py(j);
                               })
        .def("serialize", [](const Scene& s) { return py::bytes(serialize_scene(s)); })
        .def_static("deserialize", [](const py::bytes& b) { return deserialize_scene(std::string(b)); });
    m.def("generate_scene", [](std::uint64_t seed) { return generate_scene(seed); }, py::arg("seed"));

    py::class_<PyEpisode>(m, "Episode")
        .def_property_readonly("spec", [](const PyEpisode& e) { return to_py(e.episode.spec); })
        .def_property_readonly("embodiment", [](const PyEpisode& e) { return to_py(e.episode.embodiment); })
        .def_property_readonly("scene", [](const PyEpisode& e) { return e.episode.scene; });
    m.def(
        "make_episode",
        [](std::uint64_t master_seed, std::uint64_t index) {
            return PyEpisode{make_episode(master_seed, index, EpisodeConfig{})};
        },
        py::arg("master_seed"), py::arg("index"));
    m.def("plan_episode", [](const PyEpisode& e) {
        const ResolvedEpisode& r = e.episode;
        return to_py(plan_episode(r.scene, r.embodiment, r.spec.start, r.spec.task));
    });

    py::class_<Simulator>(m, "Simulator")
        .def(py::init<const PyEpisode&, int, double, bool>(), py::arg("episode"), py::arg("render_size") = 128,
             py::arg("collision_penalty") = 0.0, py::arg("render") = true)
        .def("reset", &Simulator::reset)
        .def("step", &Simulator::step, py::arg("action"))
        .def_property_readonly("steps", &Simulator::steps)
        .def_property_readonly("collisions", &Simulator::collisions);

    m.def("aggregate", [](const py::object& records) {
        return to_py(aggregate(from_py_as<std::vector<EpisodeRecord>>(records)));
    });
    m.def(
        "make_benchmark",
        [](std::uint64_t seed, std::uint64_t n, const std::string& mode, const std::string& preset) {
            BenchmarkOptions o;
            o.mode = parse_mode(mode);
            o.preset = preset;
            return to_py(make_benchmark(seed, n, o));
        },
        py::arg("seed"), py::arg("n"), py::arg("mode") = "random", py::arg("preset") = "locobot");
    m.def(
        "run_benchmark",
        [](const std::string& policy, const py::object& suite_obj, int workers, double collision_penalty,
           std::uint64_t policy_seed) {
            const auto suite = from_py_as<BenchmarkSuite>(suite_obj);
            const PolicyHandle handle = parse_policy(policy, policy_seed);
            RunOptions o;
            o.workers = workers;
            o.collision_penalty = collision_penalty;
            BenchmarkResult result;
            {
                py::gil_scoped_release release;
                result = run_benchmark(handle, suite, o);
            }
            return to_py(benchmark_report(result, handle, suite, o));
        },
        py::arg("policy"), py::arg("suite"), py::arg("workers") = 1, py::arg("collision_penalty") = 0.0,
        py::arg("policy_seed") = 0);
}
