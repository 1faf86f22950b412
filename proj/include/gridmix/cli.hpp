#pragma once

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gridmix/config.hpp"
#include "gridmix/consumer.hpp"
#include "gridmix/equilibrium.hpp"
#include "gridmix/errors.hpp"
#include "gridmix/firm.hpp"
#include "gridmix/io.hpp"
#include "gridmix/montecarlo.hpp"
#include "gridmix/planner.hpp"
#include "gridmix/riccati.hpp"

namespace gridmix::cli {

enum Exit : int { ok = 0, validation = 1, numerical = 2, io_failure = 3 };

struct Options {
  std::string config;
  std::string out;
  std::string format = "csv";
  std::optional<std::uint64_t> seed;
  std::optional<double> calibrate_pd;
  std::string agent = "consumer";
};

namespace detail {

struct Context {
  ScenarioConfig cfg;
  io::Format format;
  std::string out_dir;
  std::ostream& out;

  // Report in the requested format.
  void emit(const std::string& stem, const std::string& text) const {
    write(stem + (format == io::Format::md ? ".md" : ".csv"), text);
  }

  void write(const std::string& file, const std::string& text) const {
    if (out_dir.empty())
      out << text;
    else
      io::write_file(out_dir, file, text);
  }

  const PriceModel& price(const char* what) const {
    if (!cfg.price) throw ValidationError(std::string("price.model: required by ") + what);
    return *cfg.price;
  }
};

inline std::vector<double> time_grid(double horizon, int n = 1000) {
  std::vector<double> g(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) g[static_cast<std::size_t>(i)] = horizon * i / n;
  return g;
}

inline void gains(const Context& c) {
  const auto& p = c.cfg.params;
  const auto g = riccati::scalar_gains(p);
  const auto s = riccati::solve_sare(p);
  c.emit("gains", io::key_values({{"K_c", g.K_c},
                                  {"Lambda_c", g.Lambda_c},
                                  {"K_f", g.K_f},
                                  {"K11", s.K(0, 0)},
                                  {"K12", s.K(0, 1)},
                                  {"K22", s.K(1, 1)},
                                  {"Lambda11", s.Lambda(0, 0)},
                                  {"Lambda12", s.Lambda(0, 1)},
                                  {"Lambda22", s.Lambda(1, 1)},
                                  {"residual_K", s.residual_K},
                                  {"residual_Lambda", s.residual_Lambda},
                                  {"residual_K_c", riccati::consumer_k_residual(p, g.K_c)},
                                  {"residual_Lambda_c", riccati::consumer_lambda_residual(p, g.K_c, g.Lambda_c)},
                                  {"residual_K_f", riccati::firm_residual(p, g.K_f)}},
                                 c.format));
}

inline void stationary(const Context& c) {
  const auto& p = c.cfg.params;
  const auto sol = planner::solve(p);
  const auto mix = planner::stationary_mix(p, sol.sare.K(0, 0));
  io::Rows rows{{"planner_x_inf", mix.x_inf}, {"planner_q_inf", mix.q_inf}, {"planner_share", mix.share},
                {"planner_admissible", double(mix.admissible())}};
  const auto grid = time_grid(c.cfg.run.sim.horizon);
  if (c.cfg.price) {
    const auto pol = consumer::make_policy(p, *c.cfg.price);
    if (const auto pbar = price::stationary_mean(*c.cfg.price)) {
      const auto o = consumer::stationary_level(p, pol.gains, *pbar);
      const auto f = firm::stationary_level(p, o.x_inf);
      rows.insert(rows.end(), {{"price_stationary", *pbar},
                               {"consumer_x_inf", o.x_inf},
                               {"consumer_share", o.share},
                               {"firm_q_inf", f.q_inf},
                               {"decentralised_admissible", double(o.admissible() && f.admissible())}});
    }
    if (!c.out_dir.empty()) {
      c.write("consumer_trajectory.csv", io::trajectory_csv(consumer::mean_trajectory(pol, grid), "mean_x"));
      if (const auto mc = consumer::mean_curve(pol))
        c.write("firm_trajectory.csv", io::trajectory_csv(firm::mean_trajectory(firm::make_policy(p), *mc, grid), "mean_q"));
    }
  }
  if (!c.out_dir.empty()) c.write("planner_trajectory.csv", io::planner_trajectory_csv(sol, grid));
  c.emit("stationary", io::key_values(rows, c.format));
}

inline void pareto(const Context& c) {
  const auto& p = c.cfg.params;
  const auto g = riccati::scalar_gains(p);
  const double K11 = riccati::solve_sare(p).K(0, 0);
  const auto par = equilibrium::pareto_price(p, g.K_c, K11);
  const auto mix = planner::stationary_mix(p, K11);
  c.emit("pareto", io::key_values({{"P_star", par.P_star},
                                   {"admissible", double(par.admissible)},
                                   {"K_c", g.K_c},
                                   {"K11", K11},
                                   {"x_inf", mix.x_inf},
                                   {"q_inf", mix.q_inf},
                                   {"consistency_residual", equilibrium::pareto_consistency(p, par.P_star, g, K11)}},
                                  c.format));
}

inline void stackelberg(const Context& c) {
  const auto& p = c.cfg.params;
  const auto g = riccati::scalar_gains(p);
  const double q = c.cfg.run.q.value_or(p.q0);
  const auto s = equilibrium::stackelberg_price(p, g, q);
  const auto pre = equilibrium::preset_prices(p, g);
  const auto o = consumer::stationary_level(p, g, s.P_diamond);
  c.emit("stackelberg", io::key_values({{"q", q},
                                        {"P_F", s.P_F},
                                        {"xi", s.xi},
                                        {"xi_identity", equilibrium::xi_via_identity(p, g)},
                                        {"P_diamond", s.P_diamond},
                                        {"admissible", double(s.admissible)},
                                        {"x_inf", o.x_inf},
                                        {"P_F0", pre.P_F0},
                                        {"P_diamond_0", pre.P_diamond_0},
                                        {"P_F_existing", pre.P_F_tildeD},
                                        {"P_diamond_existing", pre.P_diamond_tildeD}},
                                       c.format));
}

inline void ordering(const Context& c) { c.emit("ordering", io::verdicts(equilibrium::ordering_report(c.cfg.params), c.format)); }

inline void table1(const Context& c) {
  const auto bat = equilibrium::scenario_battery(c.cfg.params);
  c.emit("table1", c.format == io::Format::md ? io::table1_md(bat) : io::table1_csv(bat));
}

inline void scan(const Context& c) {
  c.write("scan.csv", io::scan_csv(planner::flexibility_scan(c.cfg.params, c.cfg.run.gamma_grid, c.cfg.run.delta_grid)));
}

inline AffineSystem system_for(const Context& c, const std::string& agent) {
  const auto& p = c.cfg.params;
  if (agent == "consumer") return montecarlo::consumer_system(consumer::make_policy(p, c.price("the consumer")));
  if (agent == "firm")
    return montecarlo::firm_system(consumer::make_policy(p, c.price("the firm")), firm::make_policy(p));
  if (agent == "planner") return montecarlo::planner_system(planner::solve(p));
  if (agent == "decentralized") {
    const auto g = riccati::scalar_gains(p);
    const double P = equilibrium::pareto_price(p, g.K_c, riccati::solve_sare(p).K(0, 0)).P_star;
    return montecarlo::firm_system(consumer::make_policy(p, price::Constant{P}), firm::make_policy(p),
                                   CostKind::social);
  }
  throw ValidationError("--agent: expected consumer, firm, planner or decentralized, got '" + agent + "'");
}

inline void simulate(const Context& c, const std::string& agent) {
  const auto sys = system_for(c, agent);
  const auto r = montecarlo::simulate(sys, c.cfg.run.sim);
  if (c.out_dir.empty()) {
    c.out << io::simulation_csv(r, sys.dim == 2) << '\n' << io::simulation_summary(r);
  } else {
    io::write_file(c.out_dir, "simulate.csv", io::simulation_csv(r, sys.dim == 2));
    io::write_file(c.out_dir, "simulate_summary.csv", io::simulation_summary(r));
  }
}

inline void probe(const Context& c, const std::string& agent) {
  const auto rep = montecarlo::optimality_probe(system_for(c, agent), c.cfg.run.sim);
  c.write("probe.csv", io::probe_csv(rep));
}

inline void calibrate(const Context& c, std::optional<double> target) {
  if (!target) throw ValidationError("calibrate: needs --calibrate-pd or run.calibrate_pd");
  const auto& p = c.cfg.params;  // already calibrated by run()
  const auto g = riccati::scalar_gains(p);
  const auto b = consumer::price_bounds(p, g);
  c.emit("calibrate", io::key_values({{"target_P_D", *target},
                                      {"gamma", p.gamma},
                                      {"K_c", g.K_c},
                                      {"P_floor", b.P_floor},
                                      {"P_D", b.P_D}},
                                     c.format));
}

}  // namespace detail

// Exit codes: 0 success, 1 invalid input (including arguments outside an operation's
// domain), 2 numerical failure, 3 I/O failure.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Distributed versus centralised generation: gains, equilibria, scans and Monte Carlo checks"};
  app.fallthrough();
  app.require_subcommand(1);
  Options opt;
  app.add_option("--config", opt.config, "scenario file (key = value)")->required();
  app.add_option("--out", opt.out, "output directory; standard output when absent");
  app.add_option("--seed", opt.seed, "Monte Carlo seed, overrides run.seed");
  app.add_option("--format", opt.format, "csv or md")->check(CLI::IsMember({"csv", "md"}));
  app.add_option("--calibrate-pd", opt.calibrate_pd, "calibrate gamma so that P_D equals this price");
  const std::vector<std::pair<const char*, const char*>> commands{
      {"gains", "scalar gains and the planner's Riccati matrices"},
      {"stationary", "stationary levels; mean trajectories when --out is given"},
      {"pareto", "Pareto price and the planner's stationary mix"},
      {"stackelberg", "Stackelberg price at run.q (default q0) and the two presets"},
      {"ordering", "price ordering chain"},
      {"table1", "eight-cell scenario battery"},
      {"scan", "planner's distributed level over the gamma x delta grid"},
      {"simulate", "Monte Carlo paths and cost estimate"},
      {"probe", "perturbation probes of the optimal controls"},
      {"calibrate", "gamma matching a target P_D"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    if (std::string(name) == "simulate" || std::string(name) == "probe")
      sub->add_option("--agent", opt.agent, "consumer, firm, planner or decentralized");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return Exit::validation;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    ScenarioConfig cfg = config::load(opt.config);
    if (opt.seed) cfg.run.sim.seed = *opt.seed;
    if (opt.calibrate_pd) cfg.run.calibrate_pd = opt.calibrate_pd;
    if (!opt.out.empty()) cfg.run.out = opt.out;
    if (cfg.run.calibrate_pd) cfg.params.gamma = equilibrium::calibrate_gamma(cfg.params, *cfg.run.calibrate_pd);
    for (const auto& w : validate(cfg.params).warnings) err << "warning: " << w << '\n';
    const std::string out_dir = cfg.run.out;
    const std::optional<double> target = cfg.run.calibrate_pd;
    const detail::Context ctx{std::move(cfg), opt.format == "md" ? io::Format::md : io::Format::csv, out_dir, out};

    if (command == "gains") detail::gains(ctx);
    else if (command == "stationary") detail::stationary(ctx);
    else if (command == "pareto") detail::pareto(ctx);
    else if (command == "stackelberg") detail::stackelberg(ctx);
    else if (command == "ordering") detail::ordering(ctx);
    else if (command == "table1") detail::table1(ctx);
    else if (command == "scan") detail::scan(ctx);
    else if (command == "simulate") detail::simulate(ctx, opt.agent);
    else if (command == "probe") detail::probe(ctx, opt.agent);
    else if (command == "calibrate") detail::calibrate(ctx, target);
    return Exit::ok;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << '\n';
    return Exit::validation;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return Exit::io_failure;
  } catch (const NonConvergence& e) {
    err << "numerical failure: " << e.what() << " after " << e.steps << " steps\n";
    return Exit::numerical;
  } catch (const DegenerateError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return Exit::numerical;
  } catch (const NotPositiveDefinite& e) {
    err << "numerical failure: " << e.what() << '\n';
    return Exit::numerical;
  } catch (const CalibrationError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return Exit::numerical;
  } catch (const DomainError& e) {
    err << "invalid input: " << e.what() << '\n';
    return Exit::validation;
  }
}

}  // namespace gridmix::cli
