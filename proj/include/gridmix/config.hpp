#pragma once

#include <boost/program_options.hpp>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gridmix/errors.hpp"
#include "gridmix/montecarlo.hpp"
#include "gridmix/params.hpp"
#include "gridmix/price.hpp"

namespace gridmix {

struct RunConfig {
  SimConfig sim;
  std::vector<double> gamma_grid{1e-3, 1e-2, 1e-1, 1.0};
  std::vector<double> delta_grid{1e-3, 1e-2, 1e-1, 1.0};
  std::optional<double> q;             // initial centralised capacity for the Stackelberg price
  std::optional<double> calibrate_pd;  // target P_D for the gamma calibration
  std::string out;                     // output directory; empty writes to standard output
};

// Flat key=value file. Model keys use the field names of ModelParams; the
// price law lives under `price.` and run settings under `run.`.
struct ScenarioConfig {
  ModelParams params;
  std::optional<PriceModel> price;
  RunConfig run;
};

namespace config {

namespace po = boost::program_options;

inline po::options_description schema() {
  po::options_description d;
  auto num = [&](const char* key) { d.add_options()(key, po::value<double>()); };
  for (const char* k : {"rho", "sigma", "b", "c", "gamma", "theta", "eta", "D", "h", "delta", "pi", "lambda", "x0",
                        "q0", "annuity_distributed", "annuity_centralised"})
    num(k);
  d.add_options()("price.model", po::value<std::string>());
  for (const char* k : {"price.p_bar", "price.p_init", "price.kappa", "price.vol"}) num(k);
  d.add_options()("run.n_paths", po::value<std::size_t>())("run.seed", po::value<std::uint64_t>())(
      "run.scheme", po::value<std::string>())("run.empirical_mean", po::value<bool>())(
      "run.gamma_grid", po::value<std::string>())("run.delta_grid", po::value<std::string>())(
      "run.out", po::value<std::string>());
  for (const char* k : {"run.dt", "run.horizon", "run.tail_rate", "run.q", "run.calibrate_pd"}) num(k);
  return d;
}

inline std::vector<double> parse_grid(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos)
      throw ValidationError(key + ": '" + item + "' is not a number");
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError(key + ": empty grid");
  return out;
}

inline Scheme parse_scheme(const std::string& s) {
  if (s == "euler_maruyama") return Scheme::euler_maruyama;
  if (s == "split_rk4") return Scheme::split_rk4;
  throw ValidationError("run.scheme: expected euler_maruyama or split_rk4, got '" + s + "'");
}

inline std::optional<PriceModel> build_price(const po::variables_map& vm) {
  const bool any = vm.count("price.model") || vm.count("price.p_bar") || vm.count("price.p_init") ||
                   vm.count("price.kappa") || vm.count("price.vol");
  if (!any) return std::nullopt;
  if (!vm.count("price.model")) throw ValidationError("price.model: missing (constant, martingale or ou)");
  const auto model = vm["price.model"].as<std::string>();
  auto need = [&](const char* key) {
    if (!vm.count(key)) throw ValidationError(std::string(key) + ": required by price.model = " + model);
    return vm[key].as<double>();
  };
  auto forbid = [&](const char* key) {
    if (vm.count(key)) throw ValidationError(std::string(key) + ": not used by price.model = " + model);
  };
  auto opt = [&](const char* key) { return vm.count(key) ? vm[key].as<double>() : 0.0; };
  if (model == "constant") {
    forbid("price.p_init");
    forbid("price.kappa");
    forbid("price.vol");
    return price::Constant{need("price.p_bar")};
  }
  if (model == "martingale") {
    forbid("price.p_bar");
    forbid("price.kappa");
    const double vol = opt("price.vol");
    if (!(vol >= 0.0)) throw ValidationError("price.vol: must be >= 0");
    return price::Martingale{need("price.p_init"), vol};
  }
  if (model == "ou") {
    const double kappa = need("price.kappa");
    const double vol = opt("price.vol");
    if (!(kappa >= 0.0)) throw ValidationError("price.kappa: must be >= 0");
    if (!(vol >= 0.0)) throw ValidationError("price.vol: must be >= 0");
    return price::OrnsteinUhlenbeck{need("price.p_init"), kappa, need("price.p_bar"), vol};
  }
  throw ValidationError("price.model: expected constant, martingale or ou, got '" + model + "'");
}

inline ScenarioConfig from_variables(const po::variables_map& vm) {
  ScenarioConfig cfg;
  auto& p = cfg.params;
  auto get = [&](const char* key, double& field) {
    if (vm.count(key)) field = vm[key].as<double>();
  };
  for (auto [key, field] :
       {std::pair{"rho", &p.rho}, {"sigma", &p.sigma}, {"b", &p.b}, {"gamma", &p.gamma}, {"theta", &p.theta},
        {"eta", &p.eta}, {"D", &p.D}, {"delta", &p.delta}, {"pi", &p.pi}, {"lambda", &p.lambda}, {"x0", &p.x0},
        {"q0", &p.q0}, {"c", &p.c}, {"h", &p.h}})
    get(key, *field);
  for (const char* key : {"rho", "sigma", "b", "gamma", "theta", "eta", "D", "delta", "pi", "lambda"})
    if (!vm.count(key)) throw ValidationError(std::string(key) + ": missing");
  auto annuity = [&](const char* direct, const char* alias, auto setter) {
    if (vm.count(direct) && vm.count(alias))
      throw ValidationError(std::string(direct) + ": give either " + direct + " or " + alias + ", not both");
    if (!vm.count(direct) && !vm.count(alias))
      throw ValidationError(std::string(direct) + ": missing (or " + alias + ")");
    if (vm.count(alias)) setter(vm[alias].as<double>());
  };
  annuity("c", "annuity_distributed", [&](double a) { p.set_annuity_distributed(a); });
  annuity("h", "annuity_centralised", [&](double a) { p.set_annuity_centralised(a); });
  require_valid(p);

  cfg.price = build_price(vm);

  auto& r = cfg.run;
  if (vm.count("run.n_paths")) r.sim.n_paths = vm["run.n_paths"].as<std::size_t>();
  if (vm.count("run.seed")) r.sim.seed = vm["run.seed"].as<std::uint64_t>();
  if (vm.count("run.dt")) r.sim.dt = vm["run.dt"].as<double>();
  if (vm.count("run.horizon")) r.sim.horizon = vm["run.horizon"].as<double>();
  if (vm.count("run.tail_rate")) r.sim.tail_rate = vm["run.tail_rate"].as<double>();
  if (vm.count("run.scheme")) r.sim.scheme = parse_scheme(vm["run.scheme"].as<std::string>());
  if (vm.count("run.empirical_mean")) r.sim.empirical_mean = vm["run.empirical_mean"].as<bool>();
  if (vm.count("run.gamma_grid")) r.gamma_grid = parse_grid("run.gamma_grid", vm["run.gamma_grid"].as<std::string>());
  if (vm.count("run.delta_grid")) r.delta_grid = parse_grid("run.delta_grid", vm["run.delta_grid"].as<std::string>());
  if (vm.count("run.q")) r.q = vm["run.q"].as<double>();
  if (vm.count("run.calibrate_pd")) r.calibrate_pd = vm["run.calibrate_pd"].as<double>();
  if (vm.count("run.out")) r.out = vm["run.out"].as<std::string>();
  if (r.sim.n_paths < 2) throw ValidationError("run.n_paths: must be >= 2");
  if (!(r.sim.dt > 0.0)) throw ValidationError("run.dt: must be > 0");
  if (!(r.sim.horizon >= r.sim.dt)) throw ValidationError("run.horizon: must be >= run.dt");
  return cfg;
}

// Parses config text; ValidationError names the offending key.
inline ScenarioConfig parse(std::istream& in) {
  po::variables_map vm;
  try {
    po::store(po::parse_config_file(in, schema(), false), vm);
    po::notify(vm);
  } catch (const po::error& e) {
    throw ValidationError(e.what());
  }
  return from_variables(vm);
}

inline ScenarioConfig parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

inline ScenarioConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  return parse(in);
}

}  // namespace config
}  // namespace gridmix
