#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vaetpp/errors.hpp"
#include "vaetpp/harness.hpp"
#include "vaetpp/io.hpp"

namespace vaetpp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
    std::string config, data, out, checkpoint, split = "test", split_file, log;
    std::optional<std::uint64_t> seed;
    bool per_sequence = false;
};

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open config file '" + path + "'");
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config file '" + path + "' is not valid JSON: " + e.what());
    }
}

ExperimentConfig experiment_config(const Options& o) {
    ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
    if (o.seed) {
        c.seed = *o.seed;
    }
    c.validate();
    return c;
}

Dataset load_data(const std::string& path) {
    return load_sequences(resolve_data_path(path));
}

// explicit file, else the one stored next to the checkpoint, else a fresh split
Dataset assign_splits(Dataset ds, const Options& o, const ExperimentConfig& c, const std::string& ckpt = "") {
    if (!o.split_file.empty()) {
        return apply_split_assignment(std::move(ds), o.split_file);
    }
    if (!ckpt.empty() && fs::exists(fs::path(ckpt) / "split.json")) {
        return apply_split_assignment(std::move(ds), (fs::path(ckpt) / "split.json").string());
    }
    return split_dataset(std::move(ds), c.split, c.seed);
}

std::vector<const EventSequence*> pick(const Dataset& ds, const std::string& name) {
    if (name == "all") {
        std::vector<const EventSequence*> out;
        for (const auto& s : ds.sequences) {
            out.push_back(&s);
        }
        return out;
    }
    return ds.select(split_from_string(name));
}

int simulate(const Options& o, std::ostream& out) {
    json j = read_json(o.config);
    if (o.seed) {
        j["seed"] = *o.seed;
    }
    const ScenarioConfig s = scenario_from_json(j);
    const auto seqs = simulate_scenario(s);
    write_jsonl(seqs, o.out);
    const std::string truth_path = o.out + ".truth.json";
    std::ofstream truth(truth_path);
    truth << scenario_truth(s).dump(2) << '\n';
    if (!truth) {
        throw RuntimeFailure("cannot write '" + truth_path + "'");
    }
    std::size_t events = 0;
    for (const auto& q : seqs) {
        events += q.size();
    }
    out << json{{"sequences", seqs.size()}, {"events", events}, {"data", o.out}, {"truth", truth_path}}.dump() << '\n';
    return 0;
}

int split(const Options& o, std::ostream& out) {
    const ExperimentConfig c = experiment_config(o);
    const Dataset ds = split_dataset(load_data(o.data), c.split, c.seed);
    write_split_assignment(ds, o.out);
    out << json{{"train", ds.select(Split::train).size()},
                {"val", ds.select(Split::val).size()},
                {"test", ds.select(Split::test).size()},
                {"out", o.out}}
               .dump()
        << '\n';
    return 0;
}

int train_cmd(const Options& o, std::ostream& out) {
    const ExperimentConfig c = experiment_config(o);
    const Dataset ds = assign_splits(load_data(o.data), o, c);
    std::error_code ec;
    fs::create_directories(o.out, ec);
    if (ec) {
        throw RuntimeFailure("cannot create '" + o.out + "': " + ec.message());
    }
    const std::string log_path = o.log.empty() ? (fs::path(o.out) / "train_log.jsonl").string() : o.log;
    std::ofstream log(log_path);
    if (!log) {
        throw RuntimeFailure("cannot write log '" + log_path + "'");
    }
    const TrainResult r = train(c, ds.select(Split::train), ds.select(Split::val), &log);
    save_checkpoint(o.out, c, *r.model);
    write_split_assignment(ds, (fs::path(o.out) / "split.json").string());
    out << json{{"checkpoint", o.out},
                {"log", log_path},
                {"epochs", r.history.size()},
                {"best_epoch", r.best_epoch},
                {"best_val_nll", r.best_val_nll},
                {"train_nll", r.final_train_nll},
                {"stopped_early", r.stopped_early}}
               .dump()
        << '\n';
    return 0;
}

int evaluate_cmd(const Options& o, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    const Dataset ds = assign_splits(load_data(o.data), o, ckpt.config, o.checkpoint);
    EvaluationOptions e;
    e.latents = ckpt.config.eval_latents;
    e.noise_seed = o.seed.value_or(ckpt.config.seed);
    json report = to_json(evaluate(*ckpt.model, pick(ds, o.split), e, o.split), o.per_sequence);
    report["model"] = ckpt.model->name();
    report["checkpoint"] = o.checkpoint;
    out << report.dump() << '\n';
    return 0;
}

int export_cmd(const Options& o, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    const Dataset ds = assign_splits(load_data(o.data), o, ckpt.config, o.checkpoint);
    const int K = ckpt.config.num_intervals;
    const auto edges = edge_posteriors(*ckpt.model, pick(ds, o.split), K);
    export_graphs(edges, ckpt.model->num_types(), K, o.out);
    out << json{{"out", o.out}, {"rows", edges.size()}, {"intervals", K}}.dump() << '\n';
    return 0;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dynamic latent graph temporal point processes", "vaetpp"};
    app.require_subcommand(1);
    Options o;
    const std::vector<std::string> splits = {"train", "val", "test", "all"};

    auto* sim = app.add_subcommand("simulate", "sample sequences from a Hawkes scenario");
    sim->add_option("--config", o.config, "scenario JSON")->required();
    sim->add_option("--out", o.out, "output JSONL; truth goes to <out>.truth.json")->required();
    sim->add_option("--seed", o.seed, "override the scenario seed");

    auto* spl = app.add_subcommand("split", "write a train/val/test assignment");
    spl->add_option("--config", o.config, "experiment config JSON");
    spl->add_option("--data", o.data, "sequences (.jsonl or .csv)")->required();
    spl->add_option("--out", o.out, "assignment JSON")->required();
    spl->add_option("--seed", o.seed, "override the config seed");

    auto* trn = app.add_subcommand("train", "train a model and write a checkpoint");
    trn->add_option("--config", o.config, "experiment config JSON");
    trn->add_option("--data", o.data, "sequences (.jsonl or .csv)")->required();
    trn->add_option("--out", o.out, "checkpoint directory")->default_val("checkpoint");
    trn->add_option("--split-file", o.split_file, "assignment written by `split`");
    trn->add_option("--log", o.log, "JSONL training log (default <out>/train_log.jsonl)");
    trn->add_option("--seed", o.seed, "override the config seed");

    auto* evl = app.add_subcommand("evaluate", "report NLL, ELBO, RMSE and accuracy");
    evl->add_option("--checkpoint", o.checkpoint, "checkpoint directory")->required();
    evl->add_option("--data", o.data, "sequences (.jsonl or .csv)")->required();
    evl->add_option("--split", o.split, "train, val, test or all")->check(CLI::IsMember(splits));
    evl->add_option("--split-file", o.split_file, "assignment (default: the checkpoint's)");
    evl->add_option("--seed", o.seed, "seed of the ELBO latent samples");
    evl->add_flag("--per-sequence", o.per_sequence, "include per-sequence NLL");

    auto* exp = app.add_subcommand("export-graphs", "write posterior edge probabilities and plots");
    exp->add_option("--checkpoint", o.checkpoint, "checkpoint directory")->required();
    exp->add_option("--data", o.data, "sequences (.jsonl or .csv)")->required();
    exp->add_option("--split", o.split, "train, val, test or all")->check(CLI::IsMember(splits));
    exp->add_option("--split-file", o.split_file, "assignment (default: the checkpoint's)");
    exp->add_option("--out", o.out, "output directory")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const auto chosen = app.get_subcommands();
        err << (chosen.empty() ? app.help() : chosen.front()->help());
        return 1;
    }

    try {
        if (sim->parsed()) {
            return simulate(o, out);
        }
        if (spl->parsed()) {
            return split(o, out);
        }
        if (trn->parsed()) {
            return train_cmd(o, out);
        }
        if (evl->parsed()) {
            return evaluate_cmd(o, out);
        }
        return export_cmd(o, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "failed: " << e.what() << '\n';
        return 2;
    }
}

} // namespace vaetpp::cli
