#pragma once

#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "gridmix/consumer.hpp"
#include "gridmix/equilibrium.hpp"
#include "gridmix/errors.hpp"
#include "gridmix/montecarlo.hpp"
#include "gridmix/planner.hpp"

namespace gridmix::io {

enum class Format { csv, md };

using Rows = std::vector<std::pair<std::string, double>>;

inline std::string num(double v) { return fmt::format("{:.10g}", v); }

inline std::string key_values(const Rows& rows, Format f) {
  std::string s = f == Format::csv ? "key,value\n" : "| key | value |\n|---|---|\n";
  for (const auto& [k, v] : rows)
    s += f == Format::csv ? fmt::format("{},{}\n", k, num(v)) : fmt::format("| {} | {} |\n", k, num(v));
  return s;
}

inline std::string trajectory_csv(const std::vector<TrajectoryPoint>& pts, const char* mean_col) {
  std::string s = fmt::format("t,{},rate\n", mean_col);
  for (const auto& p : pts) s += fmt::format("{},{},{}\n", num(p.t), num(p.mean), num(p.rate));
  return s;
}

inline std::string planner_trajectory_csv(const PlannerSolution& sol, const std::vector<double>& grid) {
  std::string s = "t,mean_x,mean_q,alpha,nu\n";
  for (const auto& p : planner::mean_trajectories(sol, grid)) {
    const auto r = planner::optimal_rates(sol, p.t, p.mean_x, p.mean_q, p.mean_x, p.mean_q);
    s += fmt::format("{},{},{},{},{}\n", num(p.t), num(p.mean_x), num(p.mean_q), num(r.alpha), num(r.nu));
  }
  return s;
}

inline std::string scan_csv(const std::vector<ScanRow>& rows) {
  std::string s = "gamma,delta,K11,x_inf_mw,share,violates_gamma,violates_delta\n";
  for (const auto& r : rows)
    s += fmt::format("{},{},{},{},{},{},{}\n", num(r.gamma), num(r.delta), num(r.K11), num(r.x_inf), num(r.share),
                     int(r.violates_gamma), int(r.violates_delta));
  return s;
}

inline std::string verdicts(const std::vector<Verdict>& vs, Format f) {
  std::string s = f == Format::csv ? "relation,holds,lhs,rhs\n" : "| relation | holds | lhs | rhs |\n|---|---|---|---|\n";
  for (const auto& v : vs)
    s += f == Format::csv ? fmt::format("{},{},{},{}\n", v.name, int(v.holds), num(v.lhs), num(v.rhs))
                          : fmt::format("| {} | {} | {} | {} |\n", v.name, v.holds ? "yes" : "no", num(v.lhs),
                                        num(v.rhs));
  return s;
}

inline std::string simulation_csv(const SimResult& r, bool with_q) {
  std::string s = with_q ? "t,mean_x,var_x,mean_q,cost_running\n" : "t,mean_x,var_x,cost_running\n";
  for (const auto& p : r.points) {
    s += with_q ? fmt::format("{},{},{},{},{}\n", num(p.t), num(p.mean_x), num(p.var_x), num(p.mean_q),
                              num(p.cost_running))
                : fmt::format("{},{},{},{}\n", num(p.t), num(p.mean_x), num(p.var_x), num(p.cost_running));
  }
  return s;
}

inline std::string simulation_summary(const SimResult& r) {
  return key_values({{"cost", r.cost},
                     {"cost_se", r.cost_se},
                     {"variance_term", r.variance_term},
                     {"tail_bound", r.tail_bound},
                     {"negative_fraction", r.negative_fraction},
                     {"dt", r.dt}},
                    Format::csv);
}

inline std::string probe_csv(const ProbeReport& rep) {
  std::string s = fmt::format("# base_cost={} base_se={}\nshape,eps,amplitude_alpha,amplitude_nu,delta_cost,se,ok\n",
                              num(rep.base_cost), num(rep.base_se));
  for (const auto& r : rep.rows)
    s += fmt::format("{},{},{},{},{},{},{}\n", montecarlo::shape_name(r.shape), num(r.eps), num(r.amplitude(0)),
                     num(r.amplitude(1)), num(r.delta_cost), num(r.se), int(!r.significant_improvement));
  return s;
}

// Table cells: prices to the nearest 0.5 EUR/MWh, quantities in GW to 0.1.
// A cell without an admissible price prints "n.e." and the quantity clipped at zero.
inline std::string price_cell(const equilibrium::BatteryCell& c) {
  if (!c.admissible) return "n.e.";
  return fmt::format("{:g}", std::round(2.0 * c.price) / 2.0);
}

inline std::string quantity_cell(const equilibrium::BatteryCell& c) {
  const double gw = (c.admissible ? c.x_inf : std::max(0.0, c.x_inf)) / 1000.0;
  const double r = std::round(10.0 * gw) / 10.0;
  return fmt::format("{:.1f}", r == 0.0 ? 0.0 : r);
}

inline std::string delta_label(double d) { return d == 1.0 ? "1" : fmt::format("{:g}", d); }

inline std::string table1_md(const equilibrium::Battery& bat) {
  std::string s = fmt::format("P_floor = {} EUR/MWh, P_D = {} EUR/MWh, gamma = {}\n\n", num(bat.bounds.P_floor),
                              num(bat.bounds.P_D), num(bat.base.gamma));
  s += "| parameters | | P* | P<>_0 | P~* | P~<>_D |\n|---|---|---|---|---|---|\n";
  for (const auto& r : bat.rows) {
    const std::array<const equilibrium::BatteryCell*, 4> cells{&r.pareto, &r.stackelberg_empty, &r.pareto_existing,
                                                  &r.stackelberg_existing};
    s += fmt::format("| pi = {:g}, delta = {} | Price |", r.pi, delta_label(r.delta));
    for (const auto* c : cells) s += " " + price_cell(*c) + " |";
    s += "\n| | X_inf (GW) |";
    for (const auto* c : cells) s += " " + quantity_cell(*c) + " |";
    s += "\n";
  }
  return s;
}

inline std::string table1_csv(const equilibrium::Battery& bat) {
  std::string s = "pi,delta,K11,column,price,x_inf_mw,admissible\n";
  for (const auto& r : bat.rows) {
    const std::array<std::pair<const char*, const equilibrium::BatteryCell*>, 4> cells{
        {{"pareto", &r.pareto},
         {"stackelberg_empty", &r.stackelberg_empty},
         {"pareto_existing", &r.pareto_existing},
         {"stackelberg_existing", &r.stackelberg_existing}}};
    for (const auto& [name, c] : cells)
      s += fmt::format("{},{},{},{},{},{},{}\n", num(r.pi), num(r.delta), num(r.K11), name, num(c->price),
                       num(c->x_inf), int(c->admissible));
  }
  return s;
}

// Writes to dir/name, creating dir; IoError on failure.
inline void write_file(const std::string& dir, const std::string& name, const std::string& text) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  const auto path = std::filesystem::path(dir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace gridmix::io
