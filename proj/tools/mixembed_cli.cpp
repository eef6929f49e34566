// Command-line entry point: dataset generation, constructive embeddings,
// training drivers, distortion/PAC reporting, density export and gradient checks.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mixembed/mixembed.hpp"

namespace fs = std::filesystem;
using namespace mixembed;

namespace {

struct CommonOptions {
    std::uint64_t seed = 0;
    double alpha = 1.0;
    std::size_t k = 5;
    std::optional<std::size_t> dim;
    std::optional<std::size_t> landmarks;
    std::optional<std::size_t> iters;
    std::optional<double> lr;
    std::string scale = "desk";
    std::string out = "out";
    std::string format = "json";
};

void add_common(CLI::App* app, CommonOptions& o) {
    app->add_option("--seed", o.seed, "random seed");
    app->add_option("--alpha", o.alpha, "snowflake exponent in (0, 1]");
    app->add_option("--k", o.k, "mixture components per output");
    app->add_option("--dim", o.dim, "sphere or target dimension");
    app->add_option("--landmarks", o.landmarks, "landmark count");
    app->add_option("--iters", o.iters, "training iterations");
    app->add_option("--lr", o.lr, "initial learning rate (final = lr / 100)");
    app->add_option("--scale", o.scale, "experiment scale")->check(CLI::IsMember({"desk", "paper"}));
    app->add_option("--out", o.out, "output directory");
    app->add_option("--format", o.format, "report format")->check(CLI::IsMember({"csv", "json"}));
}

// Where the metric space comes from for embed/report.
struct SpaceSource {
    std::string matrix;
    std::string edges;
    int tree_depth = 4;
};

void add_space(CLI::App* app, SpaceSource& s) {
    app->add_option("--matrix", s.matrix, "distance matrix CSV");
    app->add_option("--edges", s.edges, "graph edge list, one 'u v' pair per line");
    app->add_option("--tree-depth", s.tree_depth, "binary tree depth when no file is given");
}

FiniteMetricSpace load_space(const SpaceSource& s) {
    if (!s.matrix.empty()) {
        std::istringstream in(read_text(s.matrix));
        return build_metric_space(read_csv_matrix(in));
    }
    if (!s.edges.empty()) {
        std::istringstream in(read_text(s.edges));
        return graph_geodesics(read_edge_list(in));
    }
    return graph_geodesics(gen_binary_tree(s.tree_depth));
}

void print(const Json& j) { std::cout << j.dump(2) << "\n"; }

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

void write_report(const fs::path& dir, const std::string& stem, const DistortionReport& r, const std::string& format) {
    if (format == "csv") write_text(dir / (stem + ".csv"), to_csv(r));
    else write_json(dir / (stem + ".json"), to_json(r));
}

std::string matrix_csv(const Matrix& m) {
    std::ostringstream ss;
    write_csv_matrix(ss, m);
    return ss.str();
}

Json space_summary(const FiniteMetricSpace& space) {
    const auto ad = aspect_ratio_and_diameter(space);
    return {{"n", space.size()}, {"diameter", ad.diameter}, {"aspect_ratio", ad.aspect}};
}

Json complexity_json(const ComplexityReport& c) {
    Json bounds = Json::array();
    for (const auto& nv : c.theorem_bounds) bounds.push_back({{"name", nv.name}, {"value", json_number(nv.value)}});
    return {{"par", c.par}, {"width", c.width}, {"depth", c.depth}, {"effdim", c.effdim},
            {"theorem_bounds", bounds}, {"note", c.note}};
}

// ---------------------------------------------------------------------------

struct GenOptions {
    std::string kind = "tree";
    int depth = 5;
    std::string family = "star";
    std::size_t a = 5;
    std::size_t b = 3;
    std::size_t count = 100;
};

int run_gen(const CommonOptions& o, const GenOptions& g) {
    const fs::path dir = o.out;
    Json summary{{"kind", g.kind}};
    if (g.kind == "sphere") {
        const std::size_t N = o.dim.value_or(2);
        const SpherePointSet pts = sphere_sample(N, g.count, o.seed);
        const FiniteMetricSpace space = sphere_metric_space(pts);
        Matrix coords(pts.points.size(), pts.ambient_dim);
        for (std::size_t i = 0; i < pts.points.size(); ++i)
            for (std::size_t c = 0; c < pts.ambient_dim; ++c) coords(i, c) = pts.points[i][c];
        write_text(dir / "points.csv", matrix_csv(coords));
        write_text(dir / "distances.csv", matrix_csv(space.matrix()));
        summary.update(space_summary(space));
        summary["sphere_dim"] = N;
    } else {
        GraphSpec graph;
        if (g.kind == "tree") {
            graph = gen_binary_tree(g.depth);
        } else if (g.kind == "two_hop") {
            const TwoHopKind fam = g.family == "star"                 ? TwoHopKind::star
                                   : g.family == "wheel"              ? TwoHopKind::wheel
                                   : g.family == "complete_bipartite" ? TwoHopKind::complete_bipartite
                                                                      : TwoHopKind::friendship;
            graph = gen_two_hop(fam, {g.a, g.b});
            summary["family"] = g.family;
        } else {
            throw ValidationError("unknown dataset kind '" + g.kind + "'");
        }
        const FiniteMetricSpace space = graph_geodesics(graph);
        std::ostringstream edges;
        write_edge_list(edges, graph);
        write_text(dir / "edges.txt", edges.str());
        write_text(dir / "distances.csv", matrix_csv(space.matrix()));
        summary.update(space_summary(space));
        summary["edges"] = graph.edges.size();
        summary["spectral_radius"] = spectral_radius(graph);
    }
    write_json(dir / "dataset.json", summary);
    print(summary);
    return 0;
}

int run_embed(const CommonOptions& o, const SpaceSource& src) {
    const FiniteMetricSpace space = load_space(src);
    const ConstructiveEmbedding emb = constructive_embed(space, o.alpha);
    std::vector<LabelledMixture> list;
    for (std::size_t i = 0; i < emb.mixtures.size(); ++i) list.push_back({std::to_string(i), emb.mixtures[i]});
    std::vector<PairDistance> dists;
    for (std::size_t i = 0; i < space.size(); ++i)
        for (std::size_t j = i + 1; j < space.size(); ++j)
            dists.push_back({i, j, mw2(emb.mixtures[i], emb.mixtures[j]).distance});
    const DistortionReport rep = distortion_report(space, dists, o.alpha);
    const fs::path dir = o.out;
    write_json(dir / "mixtures.json", to_json(list));
    write_text(dir / "bias.csv", to_csv(emb.bias));
    write_report(dir, "distortion", rep, o.format);
    Json summary = space_summary(space);
    summary["alpha"] = o.alpha;
    summary["report"] = summary_json(rep);
    summary["sqrt_n"] = std::sqrt(static_cast<double>(space.size()));
    print(summary);
    return 0;
}

struct TrainOptions {
    std::string experiment = "tree";
    std::vector<std::size_t> dims{2, 5, 10};
    std::string loss;
    std::string config;
};

std::optional<TrainConfig> train_config(const CommonOptions& o, const TrainOptions& t, Scale scale,
                                        std::size_t default_iters) {
    if (!t.config.empty()) return train_config_from_json(parse_json(read_text(t.config), t.config));
    if (!o.iters && !o.lr && t.loss.empty() && o.alpha == 1.0) return std::nullopt;
    TrainConfig c = experiment_config(scale, o.iters.value_or(default_iters));
    if (o.lr) {
        c.lr_initial = *o.lr;
        c.lr_final = *o.lr / 100.0;
    }
    if (!t.loss.empty()) c.loss_form = loss_form_from_string(t.loss);
    c.alpha = o.alpha;
    return c;
}

Json write_bundle(const ExperimentBundle& b, const fs::path& dir, const std::string& format) {
    Json runs = Json::array();
    for (const auto& r : b.runs) {
        const fs::path mdir = dir / r.name;
        write_text(mdir / "loss_history.csv", loss_history_csv(r.training));
        write_report(mdir, "train_report", r.train_report, format);
        write_report(mdir, "test_report", r.test_report, format);
        write_json(mdir / "checkpoint.json", to_json(r.training.final_params));
        write_json(mdir / "config.json", to_json(r.config));
        runs.push_back({{"name", r.name},
                        {"head", to_string(r.kind)},
                        {"dim", r.dim},
                        {"parameters", param_count(r.training.final_params)},
                        {"final_loss", r.training.loss_history.empty() ? 0.0 : r.training.loss_history.back()},
                        {"train", summary_json(r.train_report)},
                        {"test", summary_json(r.test_report)}});
    }
    Json summary{{"experiment", b.name},
                 {"scale", to_string(b.scale)},
                 {"seed", b.seed},
                 {"points", b.space.size()},
                 {"train_points", b.train.size()},
                 {"test_points", b.test.size()},
                 {"landmarks", b.landmarks.indices},
                 {"runs", runs}};
    write_json(dir / "summary.json", summary);
    return summary;
}

// GM mixtures and per-point errors of a sphere run's test points.
void write_sphere_extras(const ExperimentBundle& b, const fs::path& dir, Json& summary) {
    for (const auto& r : b.runs) {
        if (r.kind != HeadKind::gm_mixture) continue;
        const auto errors = per_point_errors(r.test_report);
        write_text(dir / r.name / "per_point_errors.csv", to_csv(errors));
        const auto& pt = std::get<PTParams>(r.training.final_params);
        std::vector<LabelledMixture> list;
        for (std::size_t i : b.test) list.push_back({std::to_string(i), pt_forward_1d(pt, b.space, i)});
        write_json(dir / r.name / "test_mixtures.json", to_json(list));
        write_text(dir / r.name / "test_density.csv", density_csv(list, {512, 4.0, true}));
        summary["fraction_below_0.1"] = fraction_below(r.test_report, 0.1);
    }
}

int run_train(const CommonOptions& o, const TrainOptions& t) {
    const Scale scale = scale_from_string(o.scale);
    const fs::path dir = o.out;
    ExperimentOptions opts;
    opts.mixture_count = o.k;
    opts.landmarks = o.landmarks;
    if (t.experiment == "tree") {
        opts.config = train_config(o, t, scale, scale == Scale::paper ? 10000 : 2000);
        print(write_bundle(run_tree_experiment(scale, o.seed, opts), dir, o.format));
    } else if (t.experiment == "s2" || t.experiment == "sphere") {
        const bool visual = t.experiment == "s2";
        const std::size_t N = visual ? 2 : o.dim.value_or(2);
        opts.config = train_config(o, t, scale, sphere_sizes(scale, visual).iterations);
        const ExperimentBundle b =
            run_sphere_experiment(N, scale, o.seed, visual ? SphereRun::visualization : SphereRun::sweep, opts);
        Json summary = write_bundle(b, dir, o.format);
        write_sphere_extras(b, dir, summary);
        write_json(dir / "summary.json", summary);
        print(summary);
    } else if (t.experiment == "sweep") {
        opts.config = train_config(o, t, scale, sphere_sizes(scale, false).iterations);
        const auto rows = run_dimension_sweep(t.dims, scale, o.seed, opts);
        write_text(dir / "sweep.csv", to_csv(rows));
        Json j = Json::array();
        for (const auto& r : rows) {
            Json row{{"N", r.N}};
            for (const auto& [name, err] : r.mean_test_error) row[name] = err;
            j.push_back(row);
        }
        write_json(dir / "sweep.json", {{"rows", j}});
        print({{"rows", j}});
    } else {
        throw ValidationError("unknown experiment '" + t.experiment + "'");
    }
    return 0;
}

struct ReportOptions {
    std::string model;
    std::string mixtures;
    std::vector<double> grid{1.0, 1.1, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0, std::numeric_limits<double>::infinity()};
};

int run_report(const CommonOptions& o, const SpaceSource& src, const ReportOptions& r) {
    const FiniteMetricSpace space = load_space(src);
    std::vector<std::size_t> everyone(space.size());
    for (std::size_t i = 0; i < everyone.size(); ++i) everyone[i] = i;
    const auto pairs = all_pairs(everyone);
    std::vector<PairDistance> dists;
    Json summary = space_summary(space);
    if (!r.model.empty()) {
        const EmbeddingModel model = model_from_json(parse_json(read_text(r.model), r.model), space.size());
        dists = embedded_distances(model, space, pairs);
        if (const auto* pt = std::get_if<PTParams>(&model)) {
            const auto ad = aspect_ratio_and_diameter(space);
            ComplexityExtras extras;
            extras.alpha = o.alpha;
            summary["complexity"] =
                complexity_json(complexity_report(*pt, {space.size(), ad.aspect, ad.diameter}, extras));
        }
    } else if (!r.mixtures.empty()) {
        const auto list = mixtures_from_json(parse_json(read_text(r.mixtures), r.mixtures));
        detail::require(list.size() == space.size(), "report: need one mixture per point of the space");
        for (const auto& [i, j] : pairs) dists.push_back({i, j, mw2(list[i].mixture, list[j].mixture).distance});
    } else {
        throw ValidationError("report needs --model or --mixtures");
    }
    const DistortionReport rep = distortion_report(space, dists, o.alpha);
    const PacCurve curve = pac_fraction_curve(rep, r.grid);
    const fs::path dir = o.out;
    write_report(dir, "report", rep, o.format);
    if (o.format == "csv") write_text(dir / "pac_curve.csv", to_csv(curve));
    else write_json(dir / "pac_curve.json", to_json(curve));
    summary["report"] = summary_json(rep);
    summary["pac_curve"] = to_json(curve)["curve"];
    print(summary);
    return 0;
}

struct PacOptions {
    std::size_t n = 100;
    std::vector<double> deltas;
    std::vector<double> distortions;
};

int run_pac(const CommonOptions& o, const PacOptions& p) {
    detail::require(!p.deltas.empty() || !p.distortions.empty(), "pac needs --delta or --distortion values");
    Json rows = Json::array();
    std::string csv = "n,delta,lambda,D,theta_D,theorem_bound,proof_rate,contributions_rate\n";
    const auto add = [&](std::optional<double> delta, double D) {
        const PacBounds b = pac_bounds(p.n, D);
        const double lambda = delta ? 0.5 * std::log(*delta) / std::log(static_cast<double>(p.n))
                                    : std::numeric_limits<double>::quiet_NaN();
        rows.push_back({{"n", p.n},
                        {"delta", delta ? json_number(*delta) : Json(nullptr)},
                        {"lambda", delta ? json_number(lambda) : Json(nullptr)},
                        {"D", D},
                        {"theta_D", b.theta},
                        {"theorem_bound", b.theorem},
                        {"proof_rate", b.proof_rate},
                        {"contributions_rate", b.headline_rate}});
        csv += std::to_string(p.n) + "," + (delta ? format_double(*delta) : "") + "," +
               (delta ? format_double(lambda) : "") + "," + format_double(D) + "," + format_double(b.theta) + "," +
               format_double(b.theorem) + "," + format_double(b.proof_rate) + "," + format_double(b.headline_rate) +
               "\n";
    };
    for (double delta : p.deltas) add(delta, pac_distortion_from_delta(p.n, delta));
    for (double D : p.distortions) add(std::nullopt, D);
    const Json out{{"min_delta", pac_min_delta(p.n)},
                   {"rows", rows},
                   {"rates",
                    {{"theorem_bound", "n^(-2 + 2 theta_D)"},
                     {"proof_rate", "n^(-4e / D), from the proof with D = 2 + epsilon"},
                     {"contributions_rate", "n^(-4e / (1 + D)), as stated in the contributions summary"}}}};
    const fs::path dir = o.out;
    if (o.format == "csv") write_text(dir / "pac.csv", csv);
    else write_json(dir / "pac.json", out);
    print(out);
    return 0;
}

struct DensityCliOptions {
    std::string mixtures;
    std::size_t points = 512;
    double sigmas = 4.0;
    bool sigma_transform = false;
};

int run_density(const CommonOptions& o, const DensityCliOptions& d) {
    detail::require(!d.mixtures.empty(), "density needs --mixtures");
    const auto list = mixtures_from_json(parse_json(read_text(d.mixtures), d.mixtures));
    write_text(fs::path(o.out) / "density.csv", density_csv(list, {d.points, d.sigmas, d.sigma_transform}));
    print({{"mixtures", list.size()}, {"points", d.points}, {"sigma_transform", d.sigma_transform}});
    return 0;
}

struct GradcheckOptions {
    std::string head = "gm_mixture";
    std::size_t trials = 50;
    std::string loss = "squared";
};

int run_gradcheck(const CommonOptions& o, const GradcheckOptions& g) {
    const FiniteMetricSpace space = graph_geodesics(gen_binary_tree(3));
    const LandmarkSet lm = make_landmarks({0, 3, 5, 9, 12}, space.size());
    TrainConfig c;
    c.seed = o.seed;
    c.batch_size = 6;
    c.alpha = o.alpha;
    c.loss_form = loss_form_from_string(g.loss);
    c.head_kind = head_kind_from_string(g.head);
    const EmbeddingModel model = c.head_kind == HeadKind::gm_mixture
                                     ? EmbeddingModel{init_pt({{8, 6}, {}, o.k, 1}, lm, o.seed)}
                                     : EmbeddingModel{init_baseline(c.head_kind, o.dim.value_or(3), {8, 6}, lm, o.seed)};
    const GradcheckResult r = gradcheck(model, space, c, g.trials);
    const Json out{{"head", g.head},
                   {"loss", g.loss},
                   {"seed", o.seed},
                   {"max_rel_error", r.max_rel_error},
                   {"checked", r.checked},
                   {"skipped", r.skipped}};
    write_json(fs::path(o.out) / "gradcheck.json", out);
    print(out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-mixture metric embeddings"};
    app.require_subcommand(1);

    CommonOptions common;
    SpaceSource space;
    GenOptions gen;
    TrainOptions train;
    ReportOptions report;
    PacOptions pac;
    DensityCliOptions density;
    GradcheckOptions gc;

    auto* gen_cmd = app.add_subcommand("gen", "generate a dataset");
    add_common(gen_cmd, common);
    gen_cmd->add_option("--kind", gen.kind)->check(CLI::IsMember({"tree", "two_hop", "sphere"}));
    gen_cmd->add_option("--depth", gen.depth, "binary tree depth");
    gen_cmd->add_option("--family", gen.family)
        ->check(CLI::IsMember({"star", "wheel", "complete_bipartite", "friendship"}));
    gen_cmd->add_option("--a", gen.a, "first 2-hop size parameter");
    gen_cmd->add_option("--b", gen.b, "second 2-hop size parameter");
    gen_cmd->add_option("--count", gen.count, "sphere sample size");

    auto* embed_cmd = app.add_subcommand("embed", "constructive mixture embedding");
    add_common(embed_cmd, common);
    add_space(embed_cmd, space);

    auto* train_cmd = app.add_subcommand("train", "run a training experiment");
    add_common(train_cmd, common);
    train_cmd->add_option("--experiment", train.experiment)->check(CLI::IsMember({"tree", "s2", "sphere", "sweep"}));
    train_cmd->add_option("--dims", train.dims, "sphere dimensions for the sweep");
    train_cmd->add_option("--loss", train.loss, "loss form")->check(CLI::IsMember({"squared", "absolute"}));
    train_cmd->add_option("--config", train.config, "TrainConfig JSON file");

    auto* report_cmd = app.add_subcommand("report", "distortion report and PAC curve");
    add_common(report_cmd, common);
    add_space(report_cmd, space);
    report_cmd->add_option("--model", report.model, "model checkpoint JSON");
    report_cmd->add_option("--mixtures", report.mixtures, "one mixture per point, JSON");
    report_cmd->add_option("--grid", report.grid, "distortion grid");

    auto* pac_cmd = app.add_subcommand("pac", "evaluate the PAC distortion formulas");
    add_common(pac_cmd, common);
    pac_cmd->add_option("--n", pac.n, "number of points");
    pac_cmd->add_option("--delta", pac.deltas, "probabilities");
    pac_cmd->add_option("--distortion", pac.distortions, "distortions D > 2");

    auto* density_cmd = app.add_subcommand("density", "sample mixture densities");
    add_common(density_cmd, common);
    density_cmd->add_option("--mixtures", density.mixtures, "mixture list JSON")->required();
    density_cmd->add_option("--points", density.points, "grid size");
    density_cmd->add_option("--sigmas", density.sigmas, "support half-width in standard deviations");
    density_cmd->add_flag("--sigma-transform", density.sigma_transform, "sample with sigma -> log10(sigma + 2.1)");

    auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check");
    add_common(gc_cmd, common);
    gc_cmd->add_option("--head", gc.head)->check(CLI::IsMember({"gm_mixture", "euclidean", "hyperbolic", "fisher_rao"}));
    gc_cmd->add_option("--trials", gc.trials, "coordinates to check");
    gc_cmd->add_option("--loss", gc.loss)->check(CLI::IsMember({"squared", "absolute"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*gen_cmd) return run_gen(common, gen);
        if (*embed_cmd) return run_embed(common, space);
        if (*train_cmd) return run_train(common, train);
        if (*report_cmd) return run_report(common, space, report);
        if (*pac_cmd) return run_pac(common, pac);
        if (*density_cmd) return run_density(common, density);
        if (*gc_cmd) return run_gradcheck(common, gc);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
