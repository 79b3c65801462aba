#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <spdlog/spdlog.h>

#include "nh/array_io.hpp"
#include "nh/config.hpp"
#include "nh/errors.hpp"
#include "nh/homogenize.hpp"
#include "nh/pipeline.hpp"
#include "nh/random_field.hpp"
#include "nh/surrogate.hpp"

namespace py = pybind11;
using namespace nh;

namespace {

py::array_t<double> to_numpy(std::vector<double> data, const std::vector<std::size_t>& shape) {
    std::vector<py::ssize_t> s(shape.begin(), shape.end());
    py::array_t<double> out(s);
    std::copy(data.begin(), data.end(), out.mutable_data());
    return out;
}

py::array_t<double> to_numpy(const Eigen::MatrixXd& m) {
    py::array_t<double> out({m.rows(), m.cols()});
    auto r = out.mutable_unchecked<2>();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) r(i, j) = m(i, j);
    return out;
}

// Nodal values of a unit patch given as a (N+1)^d array, slowest axis first.
CellPatch patch_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    const int dim = static_cast<int>(a.ndim());
    if (dim != 2 && dim != 3) throw ParameterError("patch must be a 2D or 3D array of nodal values");
    const auto n = a.shape(0);
    for (int i = 1; i < dim; ++i)
        if (a.shape(i) != n) throw ParameterError("patch must have the same node count along every axis");
    if (n < 2) throw ParameterError("patch needs at least two nodes per axis");
    CellPatch p;
    p.grid = StructuredGrid::unit(dim, static_cast<int>(n - 1));
    p.values.assign(a.data(), a.data() + a.size());
    return p;
}

void run_stage(Pipeline& p, const std::string& stage) {
    if (stage == "generate-fields") p.generate_fields();
    else if (stage == "homogenize") p.homogenize();
    else if (stage == "build-dataset") p.build_dataset();
    else if (stage == "train") p.train();
    else if (stage == "evaluate") p.evaluate();
    else if (stage == "predict") p.predict();
    else if (stage == "solve-fine") p.solve_fine();
    else if (stage == "solve-coarse") {
        p.solve_coarse(false);
        p.solve_coarse(true);
    } else if (stage == "report") p.report();
    else if (stage == "run") p.run_all();
    else throw ParameterError("unknown stage '" + stage + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Numerical homogenization of random poroelastic media with a CNN surrogate";

    py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<MissingInputError>(m, "MissingInputError", PyExc_FileNotFoundError);

    m.def("set_log_level", [](const std::string& level) { spdlog::set_level(spdlog::level::from_str(level)); },
          py::arg("level"));

    m.def("preset_names", &preset_names);
    m.def("preset", [](const std::string& name) { return serialize_config(preset(name)); }, py::arg("name"),
          "Configuration text of a built-in preset.");
    m.def("resolve_config", [](const std::string& text) { return serialize_config(parse_config(text)); },
          py::arg("text"), "Parse, validate and re-serialize configuration text with every key spelled out.");

    m.def(
        "run_pipeline",
        [](const std::string& config, const std::filesystem::path& workdir, const std::vector<std::string>& stages,
           int threads) {
            Pipeline p(parse_config(config), workdir, threads);
            py::gil_scoped_release release;
            for (const auto& s : stages) run_stage(p, s);
        },
        py::arg("config"), py::arg("workdir"), py::arg("stages") = std::vector<std::string>{"run"},
        py::arg("threads") = 1);

    m.def(
        "random_field",
        [](int dim, int cells, double sigma2, std::vector<double> l2, std::uint64_t seed, double energy_fraction,
           std::size_t max_modes) {
            const auto grid = StructuredGrid::unit(dim, cells);
            const auto basis = build_kl_basis(grid, CovarianceSpec{sigma2, std::move(l2)}, energy_fraction, max_modes);
            return to_numpy(sample_field(basis, seed).values, grid.node_shape());
        },
        py::arg("dim"), py::arg("cells"), py::arg("sigma2"), py::arg("l2"), py::arg("seed"),
        py::arg("energy_fraction") = kDefaultEnergyFraction, py::arg("max_modes") = kMaxKlModes,
        "Nodal Gaussian field Y on the unit grid, shape (n+1,)*dim with the last axis being x.");

    m.def(
        "effective_permeability",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& k) {
            return to_numpy(effective_permeability(patch_from_numpy(k)));
        },
        py::arg("k"));
    m.def(
        "effective_elasticity",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& e, double poisson) {
            return to_numpy(effective_elasticity(patch_from_numpy(e), poisson));
        },
        py::arg("youngs_modulus"), py::arg("poisson") = 0.25);

    m.def(
        "compute_metrics",
        [](const std::vector<double>& truth, const std::vector<double>& prediction) {
            const Metrics mt = compute_metrics(truth, prediction);
            py::dict d;
            d["mse"] = mt.mse;
            d["mae"] = mt.mae;
            d["rmse"] = mt.rmse;
            d["degenerate"] = mt.degenerate;
            return d;
        },
        py::arg("truth"), py::arg("prediction"));

    m.def(
        "read_array",
        [](const std::filesystem::path& path) {
            NdArray a = io::read_array(path);
            return to_numpy(std::move(a.data), a.shape);
        },
        py::arg("path"), "Load an NHAR file.");
}
