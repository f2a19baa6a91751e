// Command-line pipeline: ingest -> optional PCA -> affinities -> embedding ->
// metrics / scatterplot / timing outputs.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "pixelsne/pixelsne.hpp"

namespace fs = std::filesystem;
using namespace pixelsne;

namespace {

struct CommonArgs {
    std::string input;
    std::string synth;
    std::string format = "tsv";
    std::string label_col = "none";
    std::string out_dir = "out";
    std::uint64_t seed = 42;
    int threads = 1;
};

FileFormat parse_format(const std::string& f) {
    if (f == "tsv") return FileFormat::tsv;
    if (f == "csv") return FileFormat::csv;
    if (f == "binary") return FileFormat::binary;
    throw CLI::ValidationError("--format must be tsv, csv or binary");
}

KnnBackend parse_knn(const std::string& k) {
    if (k == "exact") return KnnBackend::exact;
    if (k == "vp") return KnnBackend::vp;
    if (k == "rp") return KnnBackend::rp;
    throw CLI::ValidationError("--knn must be exact, vp or rp");
}

Resolution parse_res(const std::string& wh) {
    const std::size_t x = wh.find('x');
    if (x == std::string::npos) throw CLI::ValidationError("--res must look like 512x512");
    Resolution r;
    r.r[0] = static_cast<std::uint32_t>(std::stoul(wh.substr(0, x)));
    r.r[1] = static_cast<std::uint32_t>(std::stoul(wh.substr(x + 1)));
    if (r.r[0] < 2 || r.r[1] < 2) throw CLI::ValidationError("--res axes must be >= 2");
    return r;
}

std::vector<std::size_t> parse_k_list(const std::string& ks) {
    std::vector<std::size_t> out;
    std::stringstream ss(ks);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (!part.empty()) out.push_back(static_cast<std::size_t>(std::stoull(part)));
    }
    if (out.empty()) throw CLI::ValidationError("--metrics-k must list at least one k");
    return out;
}

// Sub-seeds per pipeline phase, all derived from the single --seed.
enum Phase : std::uint64_t { kSynthPhase = 0, kKnnPhase = 1, kOptimizerPhase = 2 };

struct LoadedInput {
    DataMatrix data;
    std::optional<LabelVector> labels;
    std::string digest;  // input file digest, or the synth spec
};

LoadedInput load_input(const CommonArgs& c) {
    LoadedInput li;
    if (!c.synth.empty()) {
        const SynthSpec spec = SynthSpec::parse(c.synth);
        auto [m, labels] = gaussian_mixture(spec.clusters, spec.n_items, spec.dims,
                                            Rng::derive(c.seed, kSynthPhase));
        li.data = std::move(m);
        li.labels = std::move(labels);
        li.digest = c.synth;
        return li;
    }
    if (c.input.empty()) throw CLI::ValidationError("either --in or --synth is required");
    const LabelColumn lc = c.label_col == "last" ? LabelColumn::last : LabelColumn::none;
    LoadedMatrix lm = load_matrix(c.input, parse_format(c.format), lc);
    li.data = std::move(lm.data);
    li.labels = std::move(lm.labels);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                  static_cast<unsigned long long>(fnv1a64_file(c.input)));
    li.digest = buf;
    return li;
}

std::string coords_tsv(std::span<const double> coords, const LabelVector* labels) {
    std::ostringstream os;
    const std::size_t n = coords.size() / 2;
    for (std::size_t i = 0; i < n; ++i) {
        os << i << '\t' << format_double(coords[2 * i]) << '\t'
           << format_double(coords[2 * i + 1]);
        if (labels && !labels->empty()) os << '\t' << (*labels)[i];
        os << '\n';
    }
    return os.str();
}

struct CoordsFile {
    std::vector<double> coords;
    LabelVector labels;  // empty when the file had no label column
};

CoordsFile read_coords_tsv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open coordinates file: " + path.string());
    CoordsFile cf;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string id, x, y, label;
        if (!std::getline(ss, id, '\t') || !std::getline(ss, x, '\t') ||
            !std::getline(ss, y, '\t'))
            throw std::runtime_error("row " + std::to_string(row) +
                                     ": expected id<TAB>x<TAB>y[<TAB>label]");
        cf.coords.push_back(std::stod(x));
        cf.coords.push_back(std::stod(y));
        if (std::getline(ss, label, '\t')) cf.labels.push_back(label);
        ++row;
    }
    if (row == 0) throw std::runtime_error("empty coordinates file: " + path.string());
    if (!cf.labels.empty() && cf.labels.size() != row)
        throw std::runtime_error("coordinates file mixes labeled and unlabeled rows");
    return cf;
}

void floor_coords(std::vector<double>& coords) {
    for (auto& v : coords) v = std::floor(v);
}

int run_embed(const CommonArgs& c, const std::string& method, const std::string& knn,
              double perplexity, double theta, std::size_t iters, const std::string& res_str,
              int pca_dims, bool no_pca, bool want_svg, bool want_metrics,
              const std::string& metrics_k, bool floor_metrics, double svg_radius,
              double svg_opacity) {
    LoadedInput li = load_input(c);
    const Resolution res = parse_res(res_str);

    std::string pca_note = "off";
    if (!no_pca && pca_dims > 0 && li.data.n_dims > static_cast<std::size_t>(pca_dims) &&
        static_cast<std::size_t>(pca_dims) <= li.data.n_items) {
        li.data = pca_reduce(li.data, static_cast<std::size_t>(pca_dims));
        pca_note = std::to_string(pca_dims);
    }

    OptimizerConfig cfg;
    cfg.iterations = iters;
    cfg.theta = theta;
    cfg.res = res;
    cfg.seed = Rng::derive(c.seed, kOptimizerPhase);
    cfg.threads = c.threads;
    if (method == "exact") {
        cfg.backend = RepulsionBackend::dense;
        cfg.screen_scaling = false;
    } else if (method == "bhsne") {
        cfg.backend = RepulsionBackend::data_tree;
        cfg.screen_scaling = false;
    } else if (method == "pixelsne") {
        cfg.backend = RepulsionBackend::pixel_tree;
        cfg.screen_scaling = true;
    } else {
        throw CLI::ValidationError("--method must be exact, bhsne or pixelsne");
    }

    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    SparseAffinities p = build_affinities(li.data, perplexity, parse_knn(knn),
                                          Rng::derive(c.seed, kKnnPhase), {}, c.threads);
    const auto t1 = clock::now();
    EmbeddingOptimizer opt(std::move(p), cfg);
    CostTrace trace = opt.run();
    const auto t2 = clock::now();
    const double p_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    const double coord_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();

    fs::create_directories(c.out_dir);
    const fs::path out(c.out_dir);
    const LabelVector* labels = li.labels && !li.labels->empty() ? &*li.labels : nullptr;
    write_file_atomic(out / "coords.tsv", coords_tsv(opt.embedding().coords, labels));
    write_file_atomic(out / "timing.tsv", trace.to_tsv());

    RunManifest man;
    man.add("version", std::string(kVersion));
    man.add("command", std::string("embed"));
    man.add("input", c.synth.empty() ? c.input : std::string("synth"));
    man.add("input_digest", li.digest);
    man.add("format", c.format);
    man.add("label_col", c.label_col);
    man.add("seed", std::uint64_t(c.seed));
    man.add("method", method);
    man.add("knn", knn);
    man.add("perplexity", perplexity);
    man.add("theta", theta);
    man.add("iterations", std::uint64_t(iters));
    man.add("res", res_str);
    man.add("pca", pca_note);
    man.add("threads", std::uint64_t(c.threads));
    man.add("n_items", std::uint64_t(li.data.n_items));
    man.add("n_dims", std::uint64_t(li.data.n_dims));
    man.add("p_construction_ms", p_ms);
    man.add("coordinate_ms", coord_ms);
    man.add("final_cost", trace.rows.empty() ? 0.0 : trace.rows.back().cost);
    write_file_atomic(out / "manifest.txt", man.to_text());

    if (want_metrics) {
        QualityReport rep;
        rep.ks = parse_k_list(metrics_k);
        std::vector<double> zc(opt.embedding().coords);
        if (floor_metrics) floor_coords(zc);
        rep.precision = neighborhood_precision_multi(li.data, zc, rep.ks);
        if (labels) {
            rep.accuracy = knn_accuracy_multi(zc, *labels, rep.ks);
        } else {
            std::cerr << "warning: no labels available, skipping knn accuracy\n";
        }
        rep.final_kl = trace.rows.empty() ? 0.0 : trace.rows.back().cost;
        rep.p_construction_ms = p_ms;
        rep.coordinate_ms = coord_ms;
        write_file_atomic(out / "metrics.tsv", rep.to_tsv());
        std::cout << rep.to_key_values();
    }
    if (want_svg) {
        SvgOptions sopt;
        sopt.radius = svg_radius;
        sopt.opacity = svg_opacity;
        if (method == "pixelsne") sopt.screen = res;
        write_svg(out / "plot.svg", opt.embedding().coords, labels, sopt);
    }
    std::cout << "wrote " << (out / "coords.tsv").string() << " (" << li.data.n_items
              << " items, P " << p_ms << " ms, coord " << coord_ms << " ms)\n";
    return 0;
}

int run_bench(const CommonArgs& c, const std::string& methods_csv, const std::string& knn,
              double perplexity, double theta, std::size_t iters, const std::string& res_str,
              std::size_t repeats, int pca_dims, bool no_pca) {
    LoadedInput li = load_input(c);
    if (!no_pca && pca_dims > 0 && li.data.n_dims > static_cast<std::size_t>(pca_dims) &&
        static_cast<std::size_t>(pca_dims) <= li.data.n_items)
        li.data = pca_reduce(li.data, static_cast<std::size_t>(pca_dims));

    std::vector<BenchSpec> specs;
    std::stringstream ss(methods_csv);
    std::string method;
    while (std::getline(ss, method, ',')) {
        if (method.empty()) continue;
        BenchSpec spec;
        spec.name = method;
        spec.knn = parse_knn(knn);
        spec.perplexity = perplexity;
        spec.opt.iterations = iters;
        spec.opt.theta = theta;
        spec.opt.res = parse_res(res_str);
        spec.opt.seed = Rng::derive(c.seed, kOptimizerPhase);
        spec.opt.threads = c.threads;
        if (method == "exact") {
            spec.opt.backend = RepulsionBackend::dense;
            spec.opt.screen_scaling = false;
        } else if (method == "bhsne") {
            spec.opt.backend = RepulsionBackend::data_tree;
            spec.opt.screen_scaling = false;
        } else if (method == "pixelsne") {
            spec.opt.backend = RepulsionBackend::pixel_tree;
            spec.opt.screen_scaling = true;
        } else {
            throw CLI::ValidationError("--methods entries must be exact, bhsne or pixelsne");
        }
        specs.push_back(std::move(spec));
    }
    if (specs.empty()) throw CLI::ValidationError("--methods lists no methods");

    BenchTable table = benchmark(specs, li.data, repeats);
    fs::create_directories(c.out_dir);
    write_file_atomic(fs::path(c.out_dir) / "timing.tsv", table.to_tsv());
    write_file_atomic(fs::path(c.out_dir) / "timing.txt", table.to_text());
    std::cout << table.to_text();
    return 0;
}

int run_metrics(const CommonArgs& c, const std::string& coords_path, const std::string& metrics_k,
                bool floor_metrics) {
    LoadedInput li = load_input(c);
    CoordsFile cf = read_coords_tsv(coords_path);
    if (cf.coords.size() != 2 * li.data.n_items)
        throw std::runtime_error("coordinates row count does not match the input data");
    if (floor_metrics) floor_coords(cf.coords);

    QualityReport rep;
    rep.ks = parse_k_list(metrics_k);
    rep.precision = neighborhood_precision_multi(li.data, cf.coords, rep.ks);
    const LabelVector* labels = nullptr;
    if (!cf.labels.empty())
        labels = &cf.labels;
    else if (li.labels && !li.labels->empty())
        labels = &*li.labels;
    if (labels) {
        rep.accuracy = knn_accuracy_multi(cf.coords, *labels, rep.ks);
    } else {
        std::cerr << "warning: no labels available, skipping knn accuracy\n";
    }
    fs::create_directories(c.out_dir);
    write_file_atomic(fs::path(c.out_dir) / "metrics.tsv", rep.to_tsv());
    std::cout << rep.to_key_values();
    return 0;
}

int run_render(const std::string& coords_path, const std::string& out_dir,
               const std::string& res_str, double radius, double opacity) {
    CoordsFile cf = read_coords_tsv(coords_path);
    SvgOptions opts;
    opts.radius = radius;
    opts.opacity = opacity;
    if (!res_str.empty()) opts.screen = parse_res(res_str);
    fs::create_directories(out_dir);
    write_svg(fs::path(out_dir) / "plot.svg", cf.coords,
              cf.labels.empty() ? nullptr : &cf.labels, opts);
    std::cout << "wrote " << (fs::path(out_dir) / "plot.svg").string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"screen-resolution-bounded stochastic neighbor embedding"};
    app.require_subcommand(1);

    CommonArgs c;
    std::string method = "pixelsne", knn = "vp", res_str = "512x512";
    std::string methods_csv = "bhsne,pixelsne";
    std::string metrics_k = "1,3,5,10,20,30";
    std::string coords_path;
    double perplexity = 50.0, theta = 0.5;
    std::size_t iters = 1000, repeats = 3;
    int pca_dims = 50;
    bool no_pca = false, want_svg = false, want_metrics = false, floor_metrics = false;
    double svg_radius = 1.5, svg_opacity = 0.55;

    auto add_common = [&](CLI::App* cmd, bool with_labels = true) {
        cmd->add_option("--in", c.input, "input matrix file");
        cmd->add_option("--synth", c.synth, "synthetic generator spec, e.g. gaussians:10:50000:50");
        cmd->add_option("--format", c.format, "input format: tsv, csv, binary");
        if (with_labels) cmd->add_option("--label-col", c.label_col, "label column: none, last");
        cmd->add_option("--out", c.out_dir, "output directory");
        cmd->add_option("--seed", c.seed, "seed for all phases");
        cmd->add_option("--threads", c.threads, "worker threads for force evaluation");
    };

    CLI::App* embed = app.add_subcommand("embed", "embed a dataset into 2D");
    add_common(embed);
    embed->add_option("--method", method, "exact, bhsne or pixelsne");
    embed->add_option("--knn", knn, "affinity knn backend: exact, vp, rp");
    embed->add_option("--perplexity", perplexity, "target perplexity");
    embed->add_option("--theta", theta, "Barnes-Hut threshold");
    embed->add_option("--iters", iters, "gradient iterations");
    embed->add_option("--res", res_str, "screen resolution WxH");
    embed->add_option("--pca", pca_dims, "PCA target dimensionality");
    embed->add_flag("--no-pca", no_pca, "skip the PCA preprocessing step");
    embed->add_flag("--svg", want_svg, "write plot.svg");
    embed->add_flag("--metrics", want_metrics, "write metrics.tsv");
    embed->add_option("--metrics-k", metrics_k, "comma-separated k values");
    embed->add_flag("--floor-coords", floor_metrics, "floor coordinates before metrics");
    embed->add_option("--point-radius", svg_radius, "svg circle radius");
    embed->add_option("--opacity", svg_opacity, "svg circle opacity");

    CLI::App* bench = app.add_subcommand("bench", "time P construction and optimization");
    add_common(bench);
    bench->add_option("--methods", methods_csv, "comma-separated methods to compare");
    bench->add_option("--knn", knn, "affinity knn backend");
    bench->add_option("--perplexity", perplexity, "target perplexity");
    bench->add_option("--theta", theta, "Barnes-Hut threshold");
    bench->add_option("--iters", iters, "gradient iterations");
    bench->add_option("--res", res_str, "screen resolution WxH");
    bench->add_option("--repeats", repeats, "repetitions per configuration");
    bench->add_option("--pca", pca_dims, "PCA target dimensionality");
    bench->add_flag("--no-pca", no_pca, "skip the PCA preprocessing step");

    CLI::App* metrics = app.add_subcommand("metrics", "score an existing embedding");
    add_common(metrics);
    metrics->add_option("--coords", coords_path, "coords.tsv produced by embed")->required();
    metrics->add_option("--metrics-k", metrics_k, "comma-separated k values");
    metrics->add_flag("--floor-coords", floor_metrics, "floor coordinates before metrics");

    CLI::App* render = app.add_subcommand("render", "render coords.tsv as an SVG scatterplot");
    render->add_option("--coords", coords_path, "coords.tsv produced by embed")->required();
    render->add_option("--out", c.out_dir, "output directory");
    render->add_option("--res", res_str, "screen resolution WxH for the axes");
    render->add_option("--point-radius", svg_radius, "circle radius");
    render->add_option("--opacity", svg_opacity, "circle opacity");

    std::string render_res;  // render axes default to the data bounding box
    render->remove_option(render->get_option("--res"));
    render->add_option("--res", render_res, "screen resolution WxH for the axes");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(embed))
            return run_embed(c, method, knn, perplexity, theta, iters, res_str, pca_dims, no_pca,
                             want_svg, want_metrics, metrics_k, floor_metrics, svg_radius,
                             svg_opacity);
        if (app.got_subcommand(bench))
            return run_bench(c, methods_csv, knn, perplexity, theta, iters, res_str, repeats,
                             pca_dims, no_pca);
        if (app.got_subcommand(metrics))
            return run_metrics(c, coords_path, metrics_k, floor_metrics);
        if (app.got_subcommand(render))
            return run_render(coords_path, c.out_dir, render_res, svg_radius, svg_opacity);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
