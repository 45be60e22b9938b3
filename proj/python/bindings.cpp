#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "revfilt/harness.hpp"

namespace py = pybind11;
using namespace revfilt;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Images cross the boundary as 2-D float64 arrays of shape (height, width).
Image to_image(const Array& a) {
  if (a.ndim() != 2) throw DimensionMismatch("expected a 2-D array");
  const auto h = static_cast<std::size_t>(a.shape(0));
  const auto w = static_cast<std::size_t>(a.shape(1));
  std::vector<double> px(a.data(), a.data() + w * h);
  return Image(w, h, std::move(px));
}

Array to_array(const Image& img) {
  Array out({img.height(), img.width()});
  if (!img.empty()) std::memcpy(out.mutable_data(), img.pixels().data(), img.size() * sizeof(double));
  return out;
}

std::optional<Image> maybe_image(const std::optional<Array>& a) {
  if (!a) return std::nullopt;
  return to_image(*a);
}

MethodKind method_kind(const std::string& name, double lambda, double alpha) {
  MethodKind m;
  m.tag = parse_method(name);
  m.lambda = lambda;
  m.alpha = alpha;
  m.validate();
  return m;
}

py::object optional_float(const std::optional<double>& v) {
  return v ? py::object(py::float_(*v)) : py::object(py::none());
}

py::dict trace_dict(const IterationTrace& t) {
  py::list records;
  for (const auto& r : t.records) {
    py::dict d;
    d["k"] = r.k;
    d["psnr_db"] = optional_float(r.psnr_db);
    d["residual"] = optional_float(r.residual);
    d["filter_calls"] = r.filter_calls;
    d["elapsed_ms"] = optional_float(r.elapsed_ms);
    d["omega_or_lambda"] = optional_float(r.step_param);
    d["flags"] = r.flags;
    records.append(d);
  }
  py::dict out;
  out["records"] = records;
  out["method"] = t.method;
  out["accel"] = t.accel;
  out["filter"] = t.filter;
  out["diverged"] = t.diverged;
  out["flags"] = t.flag_list();
  return out;
}

IterationTrace psnr_trace(const std::vector<double>& psnrs) {
  IterationTrace t;
  for (std::size_t k = 0; k < psnrs.size(); ++k) {
    IterationRecord r;
    r.k = static_cast<int>(k);
    r.psnr_db = psnrs[k];
    t.records.push_back(r);
  }
  return t;
}

// A filter either built from a spec string or wrapping a Python callable
// that maps an array to an array of the same shape.
BlackBoxFilter make_py_filter(const py::object& f) {
  if (py::isinstance<py::str>(f)) return make_filter(parse_filter_spec(f.cast<std::string>()));
  if (!PyCallable_Check(f.ptr())) throw ConfigError("filter must be a spec string or a callable");
  return BlackBoxFilter("python", [f](const Image& x) {
    const Array y = f(to_array(x)).cast<Array>();
    return to_image(y);
  });
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Reverse image filtering with accelerated fixed-point and gradient schemes";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", error.ptr());
  py::register_exception<NonFiniteError>(m, "NonFiniteError", error.ptr());
  py::register_exception<FormatError>(m, "FormatError", error.ptr());
  py::register_exception<FilterError>(m, "FilterError", error.ptr());

  m.def("load_image", [](const std::filesystem::path& p) { return to_array(load_image(p)); },
        "Grayscale image in [0, 1] from a PGM/PPM or PNG file.", py::arg("path"));
  m.def("save_image", [](const Array& a, const std::filesystem::path& p) { save_image(to_image(a), p); },
        py::arg("image"), py::arg("path"));
  m.def("psnr", [](const Array& ref, const Array& x, double peak) { return psnr(to_image(ref), to_image(x), peak); },
        py::arg("ref"), py::arg("test"), py::arg("peak") = 1.0);
  m.def("frobenius_norm", [](const Array& a) { return frobenius_norm(to_image(a)); }, py::arg("image"));
  m.def("spectral_norm", [](const Array& a) { return spectral_norm(to_image(a)); }, py::arg("image"));

  m.def("apply_filter",
        [](const std::string& spec, const Array& a) { return to_array(make_filter(parse_filter_spec(spec)).apply(to_image(a))); },
        "Apply a built-in or external filter given as a spec such as 'gaussian:sigma=1.5'.",
        py::arg("spec"), py::arg("image"));
  m.def("filter_label", [](const std::string& spec) { return parse_filter_spec(spec).label(); }, py::arg("spec"));

  m.def("fixed_point_map",
        [](const py::object& filter, const Array& b, const Array& x, const std::string& method,
           double lambda, double alpha) {
          BlackBoxFilter g = make_py_filter(filter);
          BoundProblem prob(g, to_image(b), method_kind(method, lambda, alpha));
          return to_array(prob.fixed_point_map(to_image(x)));
        },
        py::arg("filter"), py::arg("b"), py::arg("x"), py::arg("method") = "T",
        py::arg("lam") = 1.0, py::arg("alpha") = 0.99);
  m.def("grad_surrogate",
        [](const py::object& filter, const Array& b, const Array& x, const std::string& method,
           double lambda, double alpha) {
          BlackBoxFilter g = make_py_filter(filter);
          BoundProblem prob(g, to_image(b), method_kind(method, lambda, alpha));
          return to_array(prob.grad_surrogate(to_image(x)));
        },
        py::arg("filter"), py::arg("b"), py::arg("x"), py::arg("method") = "T",
        py::arg("lam") = 1.0, py::arg("alpha") = 0.99);

  m.def("reverse",
        [](const py::object& filter, const Array& b, const std::string& method, const std::string& accel,
           int iters, const std::optional<Array>& truth, const std::optional<Array>& x0, double lambda,
           double alpha, double residual_tol, bool timing) {
          BlackBoxFilter g = make_py_filter(filter);
          const Image bi = to_image(b);
          BoundProblem prob(g, bi, method_kind(method, lambda, alpha));
          RunOptions opts;
          opts.record_timing = timing;
          opts.residual_tol = residual_tol;
          const Image start = x0 ? to_image(*x0) : bi;
          RunResult r = run_reversal(prob, parse_accel_spec(accel), start, iters, maybe_image(truth), opts);
          r.trace.filter = g.label();
          py::dict out;
          out["final"] = to_array(r.final_iterate);
          out["best"] = to_array(r.best_iterate);
          out["best_k"] = r.best_k;
          out["filter_calls"] = g.call_count();
          out["trace"] = trace_dict(r.trace);
          return out;
        },
        "Run the reversal scheme; returns final and best iterates plus the per-iteration trace.",
        py::arg("filter"), py::arg("b"), py::arg("method") = "T", py::arg("accel") = "none",
        py::arg("iters") = 100, py::arg("truth") = py::none(), py::arg("x0") = py::none(),
        py::arg("lam") = 1.0, py::arg("alpha") = 0.99, py::arg("residual_tol") = 0.0,
        py::arg("timing") = false);

  m.def("filter_calls_per_iteration",
        [](const std::string& method, const std::string& accel) {
          return filter_calls_per_iteration(parse_method(method), parse_accel_spec(accel).kind);
        },
        py::arg("method"), py::arg("accel"));
  m.def("chebyshev_omega",
        [](long long k, int period, double alpha) {
          ChebyshevSchedule s;
          s.period_T = period;
          s.clip_alpha = alpha;
          s.validate();
          return chebyshev_omega(k, s);
        },
        py::arg("k"), py::arg("period") = 32, py::arg("alpha") = 3.0);
  m.def("sgdr_lambda",
        [](int t_cur, int period, double lambda_min, double lambda_max) {
          SgdrSchedule s;
          s.period_T = period;
          s.lambda_min = lambda_min;
          s.lambda_max = lambda_max;
          s.t_cur = t_cur;
          s.validate();
          return sgdr_lambda(s);
        },
        py::arg("t_cur"), py::arg("period") = 5, py::arg("lambda_min") = 1.0, py::arg("lambda_max") = 2.0);

  m.def("improvement_series", [](const std::vector<double>& psnrs) { return improvement_series(psnr_trace(psnrs)); },
        "Percentage PSNR improvement over the first entry.", py::arg("psnrs"));
  m.def("p_max",
        [](const std::vector<std::vector<double>>& runs) {
          std::vector<IterationTrace> traces;
          for (const auto& r : runs) traces.push_back(psnr_trace(r));
          return aggregate_pmax(traces).p_max;
        },
        "Mean over runs of each run's maximum improvement.", py::arg("psnr_runs"));
}
