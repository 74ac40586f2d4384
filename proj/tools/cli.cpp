#include "cli.hpp"

#include <fstream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "promobn/error.hpp"
#include "promobn/forecast_eval.hpp"
#include "promobn/inference.hpp"
#include "promobn/parser.hpp"
#include "service.hpp"

namespace promobn::cli {

namespace {

DiscreteEvidence parse_assignments(const std::vector<std::string>& items, const char* flag) {
    DiscreteEvidence ev;
    for (const std::string& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
            throw InputError(fmt::format("{} expects node=state, got '{}'", flag, item));
        }
        ev[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return ev;
}

void print_posterior(std::ostream& out, const PosteriorReport& report) {
    for (const NodePosterior& node : report.nodes) {
        out << node.node << '\n';
        for (std::size_t i = 0; i < node.states.size(); ++i) {
            out << fmt::format("  {:<22} {:.2f}\n", node.states[i], node.probabilities[i]);
        }
    }
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hybrid Bayesian-network engine for promotional sales forecasting", "promobn"};
    app.require_subcommand(1);

    std::string net_path;
    auto* validate = app.add_subcommand("validate", "Parse and validate a .bnet model");
    validate->add_option("model", net_path, "Model file (.bnet)")->required();

    std::size_t n = 10000;
    std::uint64_t seed = 42;
    unsigned workers = 1;
    std::vector<std::string> clamps;
    auto* sample_cmd = app.add_subcommand("sample", "Forward-sample the equation node");
    sample_cmd->add_option("model", net_path, "Model file (.bnet)")->required();
    sample_cmd->add_option("--n", n, "Iterations")->check(CLI::PositiveNumber);
    sample_cmd->add_option("--seed", seed, "Master seed");
    sample_cmd->add_option("--clamp", clamps, "Observed state, node=state (repeatable)");
    sample_cmd->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

    std::optional<double> sales;
    std::string method = "convolution";
    double bandwidth = kDefaultBandwidth;
    double step = kDefaultGridStep;
    std::size_t kde_n = 100000;
    std::vector<std::string> observed;
    auto* posterior_cmd = app.add_subcommand("posterior", "Posterior of the discrete nodes given evidence");
    posterior_cmd->add_option("model", net_path, "Model file (.bnet)")->required();
    posterior_cmd->add_option("--sales", sales, "Observed value of the equation node");
    posterior_cmd->add_option("--method", method, "convolution | kde | exact");
    posterior_cmd->add_option("--bandwidth", bandwidth, "KDE bandwidth in sales units");
    posterior_cmd->add_option("--step", step, "Convolution grid step");
    posterior_cmd->add_option("--n", kde_n, "KDE samples per configuration")->check(CLI::PositiveNumber);
    posterior_cmd->add_option("--seed", seed, "KDE seed");
    posterior_cmd->add_option("--evidence", observed, "Observed state, node=state (repeatable)");
    posterior_cmd->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

    std::string data_path;
    std::string json_out = "table3.json";
    auto* report_cmd = app.add_subcommand("report", "Reproduce the MAPE comparison table from weekly data");
    report_cmd->add_option("data", data_path, "Weekly sales CSV")->required();
    report_cmd->add_option("model", net_path, "Model file (.bnet)")->required();
    report_cmd->add_option("--n", n, "Iterations per row")->check(CLI::PositiveNumber);
    report_cmd->add_option("--seed", seed, "Master seed");
    report_cmd->add_option("--out", json_out, "JSON output path");
    report_cmd->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

    std::string csv_out;
    auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic 87-week data set");
    synth_cmd->add_option("--seed", seed, "Generator seed");
    synth_cmd->add_option("--out", csv_out, "CSV output path")->required();

    std::optional<int> port;
    auto* serve_cmd = app.add_subcommand("serve", "Run the what-if HTTP service");
    serve_cmd->add_option("--port", port, "Listen port (default $PROMO_BN_PORT or 8080)")
        ->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--workers", workers, "Worker threads per request")->check(CLI::PositiveNumber);

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const std::string& a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitInputError;
    }

    try {
        if (validate->parsed()) {
            const Network net = load_network(net_path);
            out << fmt::format("OK: network \"{}\" with {} nodes\n", net.name(), net.nodes().size());
            return kExitOk;
        }
        if (sample_cmd->parsed()) {
            const Network net = load_network(net_path);
            const DiscreteEvidence ev = parse_assignments(clamps, "--clamp");
            const SampleSet s = forward_sample(net, n, seed, ev, workers);
            out << fmt::format("{}: n={} seed={}\n", s.equation_node, s.n, s.seed);
            if (s.n >= 2) {
                const MeanCI ci = equation_mean_ci(s);
                out << fmt::format("mean {:.4f}  sd {:.4f}  95% CI ({:.4f}, {:.4f})\n", ci.mean, ci.sd, ci.lower,
                                   ci.upper);
            } else {
                out << fmt::format("value {:.4f}\n", s.values.front());
            }
            return kExitOk;
        }
        if (posterior_cmd->parsed()) {
            const Network net = load_network(net_path);
            Evidence ev;
            ev.discrete = parse_assignments(observed, "--evidence");
            PosteriorOptions options;
            options.grid_step = step;
            options.kde_samples = kde_n;
            options.seed = seed;
            options.workers = workers;
            PosteriorMethod m = parse_method(method);
            if (sales) {
                const Node* eq = nullptr;
                for (const Node& node : net.nodes()) {
                    if (node.kind == NodeKind::Equation) {
                        eq = &node;
                        break;
                    }
                }
                if (eq == nullptr) {
                    throw InputError("--sales needs a network with an equation node");
                }
                ev.continuous = ContinuousEvidence{eq->id, *sales, bandwidth};
                out << fmt::format("posterior ({}) given {}={}\n", to_string(m), eq->id, *sales);
            } else {
                m = PosteriorMethod::ExactEnumeration;
                out << fmt::format("posterior ({})\n", to_string(m));
            }
            print_posterior(out, posterior(net, ev, m, options));
            return kExitOk;
        }
        if (report_cmd->parsed()) {
            const Network net = load_network(net_path);
            const auto records = load_sales_csv(data_path);
            const Table3Report report = table3_report(records, net, n, seed, workers);
            out << format_table3_text(report);
            std::ofstream file(json_out, std::ios::binary);
            if (!file) {
                err << fmt::format("error: cannot write '{}'\n", json_out);
                return kExitFailure;
            }
            file << table3_json(report);
            out << fmt::format("wrote {}\n", json_out);
            return kExitOk;
        }
        if (synth_cmd->parsed()) {
            const auto records = generate_synthetic(seed);
            std::ofstream file(csv_out, std::ios::binary);
            if (!file) {
                err << fmt::format("error: cannot write '{}'\n", csv_out);
                return kExitFailure;
            }
            write_sales_csv(file, records);
            out << fmt::format("wrote {} weekly records to {}\n", records.size(), csv_out);
            return kExitOk;
        }
        if (serve_cmd->parsed()) {
            service::ServiceOptions options;
            options.workers = workers;
            return service::serve(service::resolve_port(port), options);
        }
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitInputError;
}

}  // namespace promobn::cli
