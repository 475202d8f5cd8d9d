#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "m3/experiments.hpp"
#include "m3/http.hpp"
#include "m3/service.hpp"

namespace {

using namespace m3;
using nlohmann::json;

m3::service::HttpServer* g_server = nullptr;

void on_signal(int) {
    if (g_server != nullptr) {
        g_server->stop();
    }
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
        throw RunError(fmt::format("cannot write {}", path));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Match-3 playtesting workbench: persona evolution, baselines and the study service"};
    app.require_subcommand(1);

    // evolve ----------------------------------------------------------------
    auto* evolve = app.add_subcommand("evolve", "Evolve one persona and write a run directory");
    std::string persona_token = "maxs";
    std::string scale_token = "desk";
    std::uint64_t master_seed = 1;
    std::string out_dir;
    int workers = 1;
    std::optional<int> generations;
    bool frozen = false;
    evolve->add_option("--persona", persona_token, "maxs|mins|maxm|minm")->required();
    evolve->add_option("--scale", scale_token, "paper|desk")->capture_default_str();
    evolve->add_option("--master-seed", master_seed)->capture_default_str();
    evolve->add_option("--out", out_dir, "Run directory")->required();
    evolve->add_option("--workers", workers, "Worker threads (results do not depend on it)")->capture_default_str();
    evolve->add_option("--generations", generations, "Override the scale's generation count");
    evolve->add_flag("--frozen-seeds", frozen, "Reuse one seed batch for every generation");

    // baselines -------------------------------------------------------------
    auto* baselines = app.add_subcommand("baselines", "Random and vanilla MCTS agents on shared seeds");
    std::string metric_token = "score";
    int batch_count = 1;
    int batch_size = 50;
    int moves = 20;
    int root_visits = 250;
    std::string baselines_out;
    baselines->add_option("--metric", metric_token, "score|moves")->capture_default_str();
    baselines->add_option("--master-seed", master_seed)->capture_default_str();
    baselines->add_option("--batches", batch_count)->capture_default_str();
    baselines->add_option("--batch-size", batch_size)->capture_default_str();
    baselines->add_option("--moves", moves)->capture_default_str();
    baselines->add_option("--root-visits", root_visits)->capture_default_str();
    baselines->add_option("--workers", workers)->capture_default_str();
    baselines->add_option("--out", baselines_out, "Write per-seed results as JSON");

    // eval-presets ----------------------------------------------------------
    auto* eval = app.add_subcommand("eval-presets", "Play every agent on the preset boards");
    std::string presets_dir = "presets";
    std::string genomes_dir;
    int repeats = 1;
    std::uint64_t seed = 0;
    std::string table_out;
    eval->add_option("--presets", presets_dir)->capture_default_str();
    eval->add_option("--genomes", genomes_dir, "Directory holding genomes.json archives")->required();
    eval->add_option("--repeats", repeats)->capture_default_str();
    eval->add_option("--seed", seed)->capture_default_str();
    eval->add_option("--root-visits", root_visits)->capture_default_str();
    eval->add_option("--workers", workers)->capture_default_str();
    eval->add_option("--out", table_out, "Also write the table as JSON");

    // emit-plots ------------------------------------------------------------
    auto* plots = app.add_subcommand("emit-plots", "Write plot data for a finished run");
    std::string run_dir;
    std::string plot_out;
    plots->add_option("--run", run_dir)->required();
    plots->add_option("--out", plot_out, "Default: <run>/plot.csv");

    // serve -----------------------------------------------------------------
    auto* serve = app.add_subcommand("serve", "Run the study service");
    std::string traces_dir = "traces";
    std::string host = "127.0.0.1";
    int port = 8080;
    serve->add_option("--presets", presets_dir)->capture_default_str();
    serve->add_option("--traces", traces_dir)->capture_default_str();
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port)->capture_default_str();
    serve->add_option("--seed", seed, "Session id and round plan seed")->capture_default_str();
    serve->add_option("--genomes", genomes_dir, "Enables /study/comparison");

    // summarize -------------------------------------------------------------
    auto* summarize = app.add_subcommand("summarize", "Score table over a trace store");
    summarize->add_option("--traces", traces_dir)->capture_default_str();

    // make-preset -----------------------------------------------------------
    auto* make = app.add_subcommand("make-preset", "Generate a preset board file");
    std::string preset_id;
    int queue_length = 60;
    std::string preset_out;
    make->add_option("--id", preset_id)->required();
    make->add_option("--seed", seed)->capture_default_str();
    make->add_option("--queue-length", queue_length)->capture_default_str();
    make->add_option("--out", preset_out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (evolve->parsed()) {
            auto cfg = exp::ExperimentConfig::preset(exp::parse_scale(scale_token), Persona::parse(persona_token),
                                                     master_seed);
            cfg.evolution.workers = workers;
            cfg.evolution.frozen_seeds = frozen;
            if (generations) {
                cfg.evolution.generations = *generations;
            }
            const auto art = exp::run_experiment(cfg, out_dir);
            for (const auto& rec : art.history.generations) {
                fmt::print("gen {:>3}  min {:>10.2f}  median {:>10.2f}  max {:>10.2f}  mean {:>10.2f}  goal {:>10.2f}\n",
                           rec.generation, rec.min, rec.median, rec.max, rec.mean, rec.goal);
            }
            fmt::print("best  {}\nvanilla mean {:.2f}  random mean {:.2f}\nwrote {}\n",
                       art.history.best.genome.to_string(), art.baselines.vanilla.mean, art.baselines.random.mean,
                       out_dir);
        } else if (baselines->parsed()) {
            const MetricKind metric = parse_metric(metric_token);
            SearchConfig search;
            search.root_visits = root_visits;
            search.rollout_base = moves;
            BoardConfig board;
            board.moves_per_game = moves;
            const auto batches = exp::generate_seed_batches(master_seed, batch_count, batch_size);
            const auto b = exp::run_baselines(batches, metric, search, board, workers);
            const auto v = b.vanilla.values();
            const auto r = b.random.values();
            const auto t = exp::paired_t_test(v, r);
            fmt::print("metric {}  games {}\n", metric_token, v.size());
            fmt::print("vanilla mean {:.2f} ± {:.2f}\n", b.vanilla.mean, exp::mean_ci_half_width(v));
            fmt::print("random  mean {:.2f} ± {:.2f}\n", b.random.mean, exp::mean_ci_half_width(r));
            fmt::print("paired t {:.3f}  df {:.0f}  one-sided p {:.3g}\n", t.t, t.df, t.p_value);
            if (!baselines_out.empty()) {
                json j = exp::baselines_to_json(b);
                j["seeds"] = batches;
                write_file(baselines_out, j.dump(2) + "\n");
            }
        } else if (eval->parsed()) {
            const auto presets = load_presets(presets_dir);
            const auto genomes = exp::load_genome_archives(genomes_dir);
            SearchConfig search;
            search.root_visits = root_visits;
            const auto table = exp::eval_on_presets(presets, genomes, search, repeats, seed, workers);
            fmt::print("{}", table.to_text());
            if (!table_out.empty()) {
                write_file(table_out, table.to_json().dump(2) + "\n");
            }
        } else if (plots->parsed()) {
            const auto run = exp::load_run(run_dir);
            const std::string path = plot_out.empty() ? (std::filesystem::path(run_dir) / "plot.csv").string() : plot_out;
            exp::emit_plot_data(run.config.persona, run.generations, run.baselines,
                                run.config.evolution.moves_per_game, path);
            fmt::print("wrote {}\n", path);
        } else if (serve->parsed()) {
            service::SessionManager sessions(load_presets(presets_dir), service::TraceStore(traces_dir), seed);
            service::HttpOptions options;
            if (!genomes_dir.empty()) {
                options.genomes_dir = genomes_dir;
            }
            service::HttpServer server(sessions, options);
            const int bound = server.bind(host, port);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            fmt::print("serving on http://{}:{}\n", host, bound);
            std::fflush(stdout);
            server.serve();
            g_server = nullptr;
        } else if (summarize->parsed()) {
            const service::TraceStore store(traces_dir);
            fmt::print("{}", service::summarize_study(store.load_all()).to_text());
        } else if (make->parsed()) {
            save_preset(make_preset(preset_id, BoardConfig{}, seed, queue_length), preset_out);
            fmt::print("wrote {}\n", preset_out);
        }
    } catch (const Error& e) {
        fmt::print(stderr, "error [{}]: {}\n", e.token(), e.what());
        return 1;
    }
    return 0;
}
