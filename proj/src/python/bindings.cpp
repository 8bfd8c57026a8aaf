#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "vaetpp/harness.hpp"
#include "vaetpp/nn/distributions.hpp"

namespace py = pybind11;
using namespace vaetpp;

namespace {

nn::MixtureParams mixture(const Eigen::VectorXd& omega, const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma) {
    nn::MixtureParams p{omega, mu, sigma};
    p.validate();
    return p;
}

py::list simulate(const std::string& config) {
    const auto seqs = simulate_scenario(scenario_from_json(nlohmann::json::parse(config)));
    py::list out;
    for (const auto& s : seqs) {
        std::vector<double> t;
        std::vector<int> types;
        for (const auto& e : s.events()) {
            t.push_back(e.t);
            types.push_back(e.type);
        }
        py::dict d;
        d["seq_id"] = s.id();
        d["U"] = s.num_types();
        d["T"] = s.horizon();
        d["times"] = t;
        d["types"] = types;
        out.append(d);
    }
    return out;
}

} // namespace

PYBIND11_MODULE(_vaetpp, m) {
    m.doc() = "Dynamic latent graph temporal point processes";

    m.def(
        "lognormal_mixture_logpdf",
        [](double tau, const Eigen::VectorXd& omega, const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma) {
            return nn::lognormal_mixture_logpdf(tau, mixture(omega, mu, sigma));
        },
        py::arg("tau"), py::arg("omega"), py::arg("mu"), py::arg("sigma"));
    m.def(
        "lognormal_mixture_mean",
        [](const Eigen::VectorXd& omega, const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma) {
            return nn::lognormal_mixture_mean(mixture(omega, mu, sigma));
        },
        py::arg("omega"), py::arg("mu"), py::arg("sigma"));

    m.def("simulate_json", &simulate, py::arg("config"), "sample a scenario given as a JSON string");
    m.def(
        "scenario_truth_json",
        [](const std::string& config) { return scenario_truth(scenario_from_json(nlohmann::json::parse(config))).dump(); },
        py::arg("config"));
    m.def("auroc", &auroc, py::arg("scores"), py::arg("labels"));

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = cli::run(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "run a command line; returns (exit code, stdout, stderr)");
}
