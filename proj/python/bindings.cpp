#include <sstream>

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "overlapkit/cli.hpp"
#include "overlapkit/ensemble.hpp"
#include "overlapkit/errors.hpp"
#include "overlapkit/overlap_theory.hpp"
#include "overlapkit/sde.hpp"
#include "overlapkit/spectral.hpp"

namespace py = pybind11;
using namespace overlapkit;

namespace {

py::dict triple_dict(const OverlapTriple& o) {
    py::dict d;
    d["vbar"] = o.vbar;
    d["ubar"] = o.ubar;
    d["wbar"] = o.wbar;
    return d;
}

py::dict kernel_dict(const KernelOverlaps& k) {
    py::dict d;
    d["u1"] = k.u1_of_lambda;
    d["u2"] = k.u2_of_mu;
    d["u3"] = k.u3;
    return d;
}

py::dict estimate_dict(const OverlapEstimate& e) {
    py::dict d;
    d["value"] = e.value;
    d["se"] = e.se;
    d["trials"] = e.trials;
    return d;
}

MatrixSpec make_spec(const Dims& d, const std::vector<double>& diag) {
    return diag.empty() ? MatrixSpec::zero(d) : MatrixSpec::diagonal(d, diag);
}

}  // namespace

PYBIND11_MODULE(_overlapkit, m) {
    m.doc() = "Eigenvector overlaps between a rectangular noisy matrix and its truncation";
    m.attr("__version__") = kVersion;

    py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
    auto numerical = py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);
    py::register_exception<EdgeProximityError>(m, "EdgeProximityError", numerical.ptr());
    py::register_exception<StiffnessError>(m, "StiffnessError", numerical.ptr());
    py::register_exception<DegenerateSampleError>(m, "DegenerateSampleError", numerical.ptr());

    py::class_<MPSpec>(m, "MPSpec")
        .def(py::init<double, double, double>(), py::arg("a"), py::arg("b"), py::arg("t"))
        .def_readwrite("a", &MPSpec::a)
        .def_readwrite("b", &MPSpec::b)
        .def_readwrite("t", &MPSpec::t);

    py::class_<ShapeRatios>(m, "ShapeRatios")
        .def(py::init([](double q, double alpha, double beta, double t) {
                 ShapeRatios r{q, alpha, beta, t};
                 r.validate();
                 return r;
             }),
             py::arg("q"), py::arg("alpha"), py::arg("beta"), py::arg("t"))
        .def_readonly("q", &ShapeRatios::q)
        .def_readonly("alpha", &ShapeRatios::alpha)
        .def_readonly("beta", &ShapeRatios::beta)
        .def_readonly("t", &ShapeRatios::t)
        .def("rho", &ShapeRatios::rho)
        .def("rhot", &ShapeRatios::rhot);

    py::class_<Dims>(m, "Dims")
        .def(py::init([](std::size_t M, std::size_t N, std::size_t mm, std::size_t n) {
                 Dims d{M, N, mm, n};
                 d.validate();
                 return d;
             }),
             py::arg("M"), py::arg("N"), py::arg("m"), py::arg("n"))
        .def_static("from_ratios", &Dims::from_ratios, py::arg("M"), py::arg("q"), py::arg("alpha"), py::arg("beta"))
        .def_readonly("M", &Dims::M)
        .def_readonly("N", &Dims::N)
        .def_readonly("m", &Dims::m)
        .def_readonly("n", &Dims::n)
        .def("ratios", &Dims::ratios, py::arg("t"))
        .def("__repr__", [](const Dims& d) {
            std::ostringstream s;
            s << "Dims(M=" << d.M << ", N=" << d.N << ", m=" << d.m << ", n=" << d.n << ")";
            return s.str();
        });

    m.def("mp_edges", &mp_edges, py::arg("spec"));
    m.def("mp_density", py::vectorize(+[](double a, double b, double t, double lam) {
              return mp_density(MPSpec{a, b, t}, lam);
          }),
          py::arg("a"), py::arg("b"), py::arg("t"), py::arg("lam"));
    m.def("mp_hilbert", &mp_hilbert, py::arg("spec"), py::arg("lam"));
    m.def("mp_stieltjes", &mp_stieltjes, py::arg("spec"), py::arg("z"));
    m.def("quantile", &quantile, py::arg("spec"), py::arg("x"));
    m.def("mp_tail_mass", &mp_tail_mass, py::arg("spec"), py::arg("lam"));
    m.def("solve_implicit_G",
          [](const std::vector<double>& eigs, cplx z, double t, double q) {
              return solve_implicit_G(eigs.empty() ? zero_stieltjes() : atom_stieltjes(eigs, static_cast<double>(eigs.size())),
                                      z, t, q);
          },
          py::arg("eigs"), py::arg("z"), py::arg("t"), py::arg("q"),
          "Stieltjes transform at time t for initial eigenvalues eigs (empty: A = 0).");

    m.def("mp_overlap_triple", [](const ShapeRatios& r, double mu, double lam) {
              return triple_dict(mp_overlap_triple(r, mu, lam));
          },
          py::arg("ratios"), py::arg("mu"), py::arg("lam"));
    m.def("mp_kernel_overlaps", [](const ShapeRatios& r, double mu, double lam) {
              return kernel_dict(mp_kernel_overlaps(r, mu, lam));
          },
          py::arg("ratios"), py::arg("mu"), py::arg("lam"));
    m.def("general_overlap_triple",
          [](const Eigen::MatrixXd& A, const Dims& d, double mu, double lam, double t) {
              const auto tb = initial_tables_from_A(A, d);
              return triple_dict(general_overlap_triple(tb, d.ratios(t), d, mu, lam, t));
          },
          py::arg("A"), py::arg("dims"), py::arg("mu"), py::arg("lam"), py::arg("t"));

    m.def("mc_rescaled_overlaps",
          [](const Dims& d, double t, const std::vector<std::pair<double, double>>& targets,
             std::size_t trials, std::uint64_t seed, int threads, const std::vector<double>& diag, int window) {
              std::vector<Target> tg;
              for (auto [x, y] : targets) tg.push_back({x, y});
              McOptions o;
              o.trials = trials;
              o.seed = seed;
              o.threads = threads;
              o.window = window;
              std::vector<TargetEstimate> est;
              {
                  py::gil_scoped_release release;
                  est = mc_rescaled_overlaps(make_spec(d, diag), t, tg, o);
              }
              py::list out;
              for (const auto& e : est) {
                  py::dict r;
                  r["x"] = e.target.x;
                  r["y"] = e.target.y;
                  r["i"] = e.i;
                  r["j"] = e.j;
                  r["v"] = estimate_dict(e.v);
                  r["u"] = estimate_dict(e.u);
                  r["w"] = estimate_dict(e.w);
                  out.append(r);
              }
              return out;
          },
          py::arg("dims"), py::arg("t"), py::arg("targets"), py::arg("trials") = 200, py::arg("seed") = 1,
          py::arg("threads") = 0, py::arg("diag") = std::vector<double>{}, py::arg("window") = 0);

    m.def("integrate_eigenvalues",
          [](const Dims& d, std::vector<double> eigs, double t_final, std::size_t steps, std::uint64_t seed,
             double noise_scale) {
              SdeOptions o;
              o.noise_scale = noise_scale;
              py::gil_scoped_release release;
              return integrate(EigenState{0.0, std::move(eigs), d}, t_final, steps, seed, o).eigs;
          },
          py::arg("dims"), py::arg("eigs"), py::arg("t_final"), py::arg("steps"), py::arg("seed") = 1,
          py::arg("noise_scale") = 1.0);

    m.def("run_cli",
          [](const std::vector<std::string>& args) {
              std::ostringstream out, err;
              const int code = run_cli(args, out, err);
              return py::make_tuple(code, out.str(), err.str());
          },
          py::arg("args"), "Runs one CLI invocation in-process; returns (exit_code, stdout, stderr).");
}
