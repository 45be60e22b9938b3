#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "revfilt/harness.hpp"

namespace revfilt {

std::string method_token(Method m) { return m == Method::p ? "p2" : to_string(m); }

namespace {

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-';
    out.push_back(keep ? c : '_');
  }
  return out;
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
}

struct Cell {
  std::size_t image;
  std::size_t filter;
  std::size_t method;
  std::size_t accel;
};

std::string cell_key(const std::string& filter, Method m, const std::string& accel) {
  return filter + "\x1f" + to_string(m) + "\x1f" + accel;
}

// Summaries are keyed by (filter name, method, accel label).
std::map<std::string, const ImprovementSummary*> index_summaries(const ExperimentResult& res) {
  std::map<std::string, const ImprovementSummary*> out;
  for (const auto& s : res.summaries) out[cell_key(s.filter, parse_method(s.method), s.accel)] = &s;
  return out;
}

struct CellStats {
  std::optional<double> p_max;
  bool nonconvergent = false;
  bool errored = false;
};

CellStats stats_for(const ExperimentResult& res,
                    const std::map<std::string, const ImprovementSummary*>& index,
                    const std::string& filter, Method m, const std::string& accel) {
  CellStats st;
  const auto it = index.find(cell_key(filter, m, accel));
  if (it != index.end()) {
    st.p_max = it->second->p_max;
    st.nonconvergent = it->second->diverged_count > 0;
  }
  for (const auto& c : res.cells) {
    if (c.filter_name == filter && c.method.tag == m && c.accel.label() == accel) {
      if (c.trace.error) st.errored = true;
      if (c.trace.diverged) st.nonconvergent = true;
    }
  }
  return st;
}

std::string render(const CellStats& st) {
  if (!st.p_max) return st.errored ? "err" : "";
  return fixed(*st.p_max) + (st.nonconvergent ? " (nc)" : "");
}

}  // namespace

ExperimentResult run_experiment(const RunConfig& cfg) {
  cfg.validate();
  std::vector<Image> images;
  std::vector<std::string> image_ids;
  for (const auto& p : cfg.images) {
    images.push_back(load_image(p));
    image_ids.push_back(p.stem().string());
  }
  {
    auto sorted = image_ids;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ConfigError("image file names must have distinct stems");
    }
  }

  std::vector<Cell> cells;
  for (std::size_t f = 0; f < cfg.filters.size(); ++f)
    for (std::size_t m = 0; m < cfg.methods.size(); ++m)
      for (std::size_t a = 0; a < cfg.accels.size(); ++a)
        for (std::size_t i = 0; i < images.size(); ++i) cells.push_back({i, f, m, a});

  const auto trace_dir = cfg.out_dir / "traces";
  std::filesystem::create_directories(trace_dir);

  ExperimentResult result;
  result.cells.resize(cells.size());

  auto run_cell = [&](std::size_t idx) {
    const Cell& c = cells[idx];
    const NamedFilter& nf = cfg.filters[c.filter];
    const MethodKind& mk = cfg.methods[c.method];
    const AccelSpec& accel = cfg.accels[c.accel];
    CellResult& out = result.cells[idx];
    out.filter_name = nf.name;
    out.method = mk;
    out.accel = accel;
    out.image_id = image_ids[c.image];
    out.trace_path = trace_dir / (sanitize(nf.name) + "__" + method_token(mk.tag) + "__" +
                                  sanitize(accel.label()) + "__" + sanitize(out.image_id) + ".csv");
    try {
      BlackBoxFilter g = make_filter(nf.spec);
      const Image& truth = images[c.image];
      Image b = g.apply(truth);
      BoundProblem prob(g, b, mk);
      RunOptions opts;
      opts.record_timing = cfg.record_timing;
      opts.residual_tol = cfg.residual_tol;
      RunResult r = run_reversal(prob, accel, b, cfg.budget_for(nf), truth, opts);
      out.trace = std::move(r.trace);
    } catch (const std::exception& e) {
      out.trace.error = e.what();
    }
    out.trace.filter = nf.name;
    out.trace.method = to_string(mk.tag);
    out.trace.accel = accel.label();
    out.trace.image_id = out.image_id;
    if (!out.trace.error) write_trace_csv(out.trace, out.trace_path);
  };

  const int jobs = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(cells.size())));
  if (jobs == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(i);
      });
    }
  }

  // Merge in the fixed cell order; parallelism never changes the output.
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::vector<IterationTrace>> groups;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& cr = result.cells[i];
    if (cr.trace.error || cr.trace.records.empty()) continue;
    groups[{cells[i].filter, cells[i].method, cells[i].accel}].push_back(cr.trace);
  }
  for (auto& [key, traces] : groups) result.summaries.push_back(aggregate_pmax(traces));

  for (const auto& m : cfg.methods) {
    write_text(cfg.out_dir / ("summary_" + method_token(m.tag) + ".csv"),
               summary_table_csv(cfg, result, m.tag));
  }
  write_text(cfg.out_dir / "best.csv", best_table_csv(cfg, result));
  write_text(cfg.out_dir / "summary.txt", summary_text(cfg, result));
  return result;
}

std::string summary_table_csv(const RunConfig& cfg, const ExperimentResult& res, Method method) {
  const auto index = index_summaries(res);
  std::ostringstream os;
  os << "filter";
  for (const auto& a : cfg.accels) os << ',' << a.label();
  os << '\n';
  for (const auto& f : cfg.filters) {
    os << f.name;
    for (const auto& a : cfg.accels) os << ',' << render(stats_for(res, index, f.name, method, a.label()));
    os << '\n';
  }
  return os.str();
}

std::string best_table_csv(const RunConfig& cfg, const ExperimentResult& res) {
  const auto index = index_summaries(res);
  std::ostringstream os;
  os << "filter,method,baseline,best_accel,best_pmax\n";
  for (const auto& f : cfg.filters) {
    for (const auto& m : cfg.methods) {
      std::string baseline = "";
      std::string best_label;
      std::optional<double> best;
      bool best_nc = false;
      for (const auto& a : cfg.accels) {
        const CellStats st = stats_for(res, index, f.name, m.tag, a.label());
        if (a.kind == AccelKind::none) baseline = render(st);
        if (st.p_max && (!best || *st.p_max > *best)) {
          best = st.p_max;
          best_label = a.label();
          best_nc = st.nonconvergent;
        }
      }
      os << f.name << ',' << to_string(m.tag) << ',' << baseline << ',' << best_label << ','
         << (best ? fixed(*best) + (best_nc ? " (nc)" : "") : "") << '\n';
    }
  }
  return os.str();
}

std::string summary_text(const RunConfig& cfg, const ExperimentResult& res) {
  const auto index = index_summaries(res);
  std::ostringstream os;
  os << "p_max (mean over " << cfg.images.size()
     << " images of the maximum PSNR improvement, %); (nc) = non-convergent run present\n";
  std::size_t name_w = 6;
  for (const auto& f : cfg.filters) name_w = std::max(name_w, f.name.size());
  for (const auto& m : cfg.methods) {
    os << "\nMethod " << to_string(m.tag) << "\n";
    std::vector<std::size_t> widths;
    os << std::string(name_w, ' ');
    for (const auto& a : cfg.accels) {
      widths.push_back(std::max<std::size_t>(a.label().size(), 12));
      os << "  " << a.label() << std::string(widths.back() - a.label().size(), ' ');
    }
    os << '\n';
    for (const auto& f : cfg.filters) {
      os << f.name << std::string(name_w - f.name.size(), ' ');
      for (std::size_t j = 0; j < cfg.accels.size(); ++j) {
        const std::string cell = render(stats_for(res, index, f.name, m.tag, cfg.accels[j].label()));
        os << "  " << cell << std::string(widths[j] - std::min(widths[j], cell.size()), ' ');
      }
      os << '\n';
    }
  }
  os << "\nBest acceleration per filter and method\n" << best_table_csv(cfg, res);
  return os.str();
}

Image doctor_probe_image() {
  Image img(64, 64);
  for (std::size_t y = 0; y < 64; ++y) {
    for (std::size_t x = 0; x < 64; ++x) {
      const double ramp = 0.15 + 0.6 * static_cast<double>(x + y) / 126.0;
      const double checker = ((x / 8 + y / 8) % 2 == 0) ? 0.1 : -0.1;
      img(x, y) = ramp + checker;
    }
  }
  return img;
}

DoctorReport doctor_filter(BlackBoxFilter& filter, const Image& probe) {
  DoctorReport rep;
  Image first, second;
  try {
    first = filter.apply(probe);
    rep.shape_preserved = true;
    second = filter.apply(probe);
  } catch (const std::exception& e) {
    rep.message = e.what();
    return rep;
  }
  rep.max_abs_diff = max_abs_diff(first, second);
  rep.deterministic = first.bitwise_equal(second);
  rep.message = rep.deterministic
                    ? "filter is deterministic and preserves dimensions"
                    : "filter is NOT deterministic: two applications differ by up to " +
                          std::to_string(rep.max_abs_diff);
  return rep;
}

}  // namespace revfilt
