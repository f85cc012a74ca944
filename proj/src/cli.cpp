#include "pnmf/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <limits>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

#include "pnmf/data.hpp"
#include "pnmf/model.hpp"
#include "pnmf/rng.hpp"
#include "pnmf/solver.hpp"
#include "pnmf/validate.hpp"

namespace pnmf {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) {
        throw ParseError("cannot open for writing: " + path.string());
    }
    out << text;
}

json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open: " + path.string());
    }
    json doc;
    in >> doc;
    return doc;
}

struct GenerateOptions {
    std::string kind = "uniform";
    Index n = 25;
    Index k = 3;
    Index p = 16;
    double noise_lambda = std::numeric_limits<double>::infinity();
    std::uint64_t seed = 1;
    std::string out;
};

int cmd_generate(const GenerateOptions& opt) {
    DatasetConfig cfg;
    cfg.kind = opt.kind == "smooth" ? DatasetKind::Smooth : DatasetKind::Uniform;
    cfg.n = opt.n;
    cfg.k = opt.k;
    cfg.p = opt.p;
    cfg.noise_lambda = opt.noise_lambda;
    cfg.seed = opt.seed;
    const Dataset ds = cfg.kind == DatasetKind::Smooth ? gen_smooth(cfg) : gen_uniform(cfg);

    const fs::path dir(opt.out);
    fs::create_directories(dir);
    save_matrix((dir / "W_true.raw64").string(), ds.W_true, MatrixFormat::Raw64);
    save_matrix((dir / "H_true.raw64").string(), ds.H_true, MatrixFormat::Raw64);
    save_matrix((dir / "Y_clean.raw64").string(), ds.Y_clean, MatrixFormat::Raw64);
    save_matrix((dir / "Y_noisy.raw64").string(), ds.Y_noisy, MatrixFormat::Raw64);

    json manifest = {
        {"schema_version", 1},
        {"kind", opt.kind},
        {"n", opt.n},
        {"k", opt.k},
        {"p", opt.p},
        {"noise_lambda",
         std::isinf(opt.noise_lambda) ? json(nullptr) : json(opt.noise_lambda)},
        {"seed", opt.seed},
        {"format", "raw64"},
        {"files",
         {{"W_true", "W_true.raw64"},
          {"H_true", "H_true.raw64"},
          {"Y_clean", "Y_clean.raw64"},
          {"Y_noisy", "Y_noisy.raw64"}}},
    };
    write_text(dir / "manifest.json", manifest.dump(2));
    return kExitOk;
}

struct SolveOptions {
    std::string input;   // dataset directory with a manifest
    std::string matrix;  // or a single matrix file
    bool use_clean = false;
    std::string algo = "mu";
    Index k = 0;  // 0 = take from manifest (or 3)
    double epsilon = 1e-8;
    double laplacian_weight = 0.0;
    double log_sparsity_alpha = 0.0;
    bool barrier = false;
    bool simplex_h = false;
    std::string simplex_weights;
    std::string linesearch;  // "upsilon,tau"
    int max_iter = 200;
    double rel_tol = 1e-10;
    double dichotomy_tol = 1e-12;
    std::uint64_t seed = 1;
    int trace_every = 1;
    std::string out;
};

Matrix load_matrix_auto(const std::string& path) {
    const fs::path p(path);
    if (!fs::exists(p)) {
        throw ParseError("missing input file: " + path);
    }
    return load_matrix(path, p.extension() == ".csv" ? MatrixFormat::Csv : MatrixFormat::Raw64);
}

const char* termination_name(Termination t) {
    switch (t) {
        case Termination::Converged:
            return "converged";
        case Termination::MaxIter:
            return "max-iter";
        default:
            return "aborted";
    }
}

int cmd_solve(const SolveOptions& opt) {
    Matrix Y;
    Index k = opt.k;
    if (!opt.input.empty()) {
        const fs::path dir(opt.input);
        const json manifest = load_json(dir / "manifest.json");
        const std::string file = opt.use_clean ? "Y_clean" : "Y_noisy";
        Y = load_matrix_auto((dir / manifest.at("files").at(file).get<std::string>()).string());
        if (k == 0) {
            k = manifest.at("k").get<Index>();
        }
    } else if (!opt.matrix.empty()) {
        Y = load_matrix_auto(opt.matrix);
    } else {
        throw ParseError("either --input or --matrix is required");
    }
    if (k == 0) {
        k = 3;
    }

    RegularizerSpec reg_h;
    if (opt.laplacian_weight > 0.0) {
        const Index p = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(Y.cols()))));
        if (p * p != Y.cols()) {
            throw DomainError("laplacian regularizer needs m = p^2 columns");
        }
        auto lap = std::make_shared<SparseSymmetricOperator>(laplacian_2d(p));
        reg_h = reg_h.merged_with(laplacian_smoothness(opt.laplacian_weight, lap));
    }
    if (opt.barrier) {
        // Barrier strictly inside the floor; sigma follows from the offset.
        const double offset = opt.epsilon / 2.0;
        const double ratio = opt.epsilon / (opt.epsilon - offset);
        reg_h = reg_h.merged_with(log_barrier(offset, ratio * ratio));
    }
    if (opt.log_sparsity_alpha > 0.0) {
        reg_h = reg_h.merged_with(log_sparsity(opt.log_sparsity_alpha));
    }

    std::optional<GeneralizedSimplex> constraint;
    if (opt.simplex_h) {
        GeneralizedSimplex simplex;
        simplex.side = ConstraintSide::HColumns;
        if (!opt.simplex_weights.empty()) {
            const Matrix weights = load_matrix_auto(opt.simplex_weights);
            if (weights.size() != k) {
                throw DomainError("simplex weights must have k entries");
            }
            simplex.e = Eigen::Map<const Vector>(weights.data(), weights.size());
        } else {
            simplex.e = Vector::Ones(k);
        }
        constraint = std::move(simplex);
    }

    const ProblemSpec spec =
        ProblemSpec::create(std::move(Y), k, opt.epsilon, std::move(constraint), {}, reg_h);

    SolverConfig config;
    config.max_iter = opt.max_iter;
    config.rel_tol = opt.rel_tol;
    config.dichotomy_tol = opt.dichotomy_tol;
    config.seed = opt.seed;
    config.trace_every = opt.trace_every;
    if (!opt.linesearch.empty()) {
        LineSearchConfig ls;
        if (std::sscanf(opt.linesearch.c_str(), "%lf,%lf", &ls.upsilon, &ls.tau) != 2) {
            throw ParseError("--linesearch expects \"upsilon,tau\"");
        }
        config.linesearch = ls;
    }

    SolveResult result;
    if (opt.algo == "mu" || opt.algo == "qu") {
        config.algorithm = opt.algo == "mu" ? Algorithm::MU : Algorithm::QU;
        result = tbsum_solve(spec, config);
    } else if (opt.algo == "bmd") {
        config.algorithm = Algorithm::BMD;
        result = bmd_solve(spec, config);
    } else if (opt.algo == "pgd") {
        config.algorithm = Algorithm::PGD;
        result = pgd_solve(spec, config);
    } else {
        throw ParseError("unknown algorithm: " + opt.algo);
    }

    const fs::path dir(opt.out);
    fs::create_directories(dir);
    save_matrix((dir / "W.raw64").string(), result.W, MatrixFormat::Raw64);
    save_matrix((dir / "H.raw64").string(), result.H, MatrixFormat::Raw64);
    trace_to_csv(result.trace, (dir / "trace.csv").string());
    write_text(dir / "trace.json", trace_to_json(result.trace));

    json kkt = nullptr;
    try {
        kkt = kkt_residual(result.W, result.H, spec);
    } catch (const std::exception&) {
        // Aborted runs may sit outside the feasible set; keep null.
    }
    const TracePoint& last = result.trace.points.back();
    json summary = {
        {"schema_version", 1},
        {"algorithm", opt.algo},
        {"termination", termination_name(result.termination)},
        {"warnings", result.warnings},
        {"iterations", last.iter},
        {"final_objective", last.objective},
        {"kl_part", last.kl_part},
        {"constraint_violation", last.constraint_violation},
        {"kkt_residual", kkt},
        {"seconds", result.total_seconds},
        {"dichotomy_seconds", result.trace.dichotomy_seconds},
        {"files",
         {{"W", "W.raw64"},
          {"H", "H.raw64"},
          {"trace_csv", "trace.csv"},
          {"trace_json", "trace.json"}}},
    };
    write_text(dir / "summary.json", summary.dump(2));
    return kExitOk;
}

struct BenchmarkOptions {
    std::vector<Index> n_grid = {25, 100};
    int reps = 5;
    int iters = 100;
    std::vector<std::string> algos = {"mu", "qu", "bmd", "pgd"};
    std::string kind = "smooth";
    Index k = 3;
    Index p = 16;
    double noise_lambda = std::numeric_limits<double>::infinity();
    double laplacian_weight = 1.0;
    bool simplex_h = true;
    std::uint64_t seed = 1;
    int parallel_runs = 1;
    std::string out;
};

struct BenchmarkRun {
    std::string algo;
    Index n = 0;
    int rep = 0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    double final_objective = 0.0;
    double seconds = 0.0;
    double seconds_per_iter = 0.0;
    double dichotomy_seconds = 0.0;
    long dichotomy_iters = 0;
    int iterations = 0;
    std::string trace_file;
};

int cmd_benchmark(const BenchmarkOptions& opt) {
    const fs::path dir(opt.out);
    fs::create_directories(dir);

    struct Job {
        std::string algo;
        Index n;
        int rep;
    };
    std::vector<Job> jobs;
    for (const std::string& algo : opt.algos) {
        for (Index n : opt.n_grid) {
            for (int rep = 0; rep < opt.reps; ++rep) {
                jobs.push_back({algo, n, rep});
            }
        }
    }
    std::vector<BenchmarkRun> runs(jobs.size());

    auto execute = [&](std::size_t idx) {
        const Job& job = jobs[idx];
        BenchmarkRun& run = runs[idx];
        run.algo = job.algo;
        run.n = job.n;
        run.rep = job.rep;
        run.seed = Rng::derive(opt.seed, 31 * static_cast<std::uint64_t>(job.rep) + 1);
        try {
            DatasetConfig dcfg;
            dcfg.kind = opt.kind == "smooth" ? DatasetKind::Smooth : DatasetKind::Uniform;
            dcfg.n = job.n;
            dcfg.k = opt.k;
            dcfg.p = opt.p;
            dcfg.noise_lambda = opt.noise_lambda;
            dcfg.seed = run.seed;
            const Dataset ds =
                dcfg.kind == DatasetKind::Smooth ? gen_smooth(dcfg) : gen_uniform(dcfg);

            RegularizerSpec reg_h;
            if (opt.laplacian_weight > 0.0) {
                auto lap = std::make_shared<SparseSymmetricOperator>(laplacian_2d(opt.p));
                reg_h = laplacian_smoothness(opt.laplacian_weight, lap);
            }
            std::optional<GeneralizedSimplex> constraint;
            if (opt.simplex_h) {
                constraint = GeneralizedSimplex{Vector::Ones(opt.k), ConstraintSide::HColumns};
            }
            const ProblemSpec spec = ProblemSpec::create(ds.Y_noisy, opt.k, 1e-8,
                                                         std::move(constraint), {}, reg_h);
            SolverConfig config;
            config.max_iter = opt.iters;
            config.rel_tol = 0.0;  // fixed iteration budget
            config.seed = run.seed;
            config.trace_every = 1;

            SolveResult result;
            if (job.algo == "mu" || job.algo == "qu") {
                config.algorithm = job.algo == "mu" ? Algorithm::MU : Algorithm::QU;
                result = tbsum_solve(spec, config);
            } else if (job.algo == "bmd") {
                result = bmd_solve(spec, config);
            } else if (job.algo == "pgd") {
                result = pgd_solve(spec, config);
            } else {
                throw ParseError("unknown algorithm: " + job.algo);
            }

            char name[128];
            std::snprintf(name, sizeof(name), "trace_%s_n%lld_r%d.csv", job.algo.c_str(),
                          static_cast<long long>(job.n), job.rep);
            run.trace_file = name;
            trace_to_csv(result.trace, (dir / name).string());
            run.final_objective = result.final_objective();
            run.seconds = result.total_seconds;
            run.iterations = result.trace.points.back().iter;
            run.seconds_per_iter =
                run.iterations > 0 ? run.seconds / static_cast<double>(run.iterations) : 0.0;
            run.dichotomy_seconds = result.trace.dichotomy_seconds;
            run.dichotomy_iters = result.trace.points.back().dichotomy_iters;
        } catch (const std::exception& ex) {
            run.failed = true;
            run.error = ex.what();
        }
    };

    if (opt.parallel_runs > 1) {
        std::atomic<std::size_t> cursor{0};
        std::vector<std::thread> workers;
        const int count = std::min<int>(opt.parallel_runs, static_cast<int>(jobs.size()));
        for (int w = 0; w < count; ++w) {
            workers.emplace_back([&]() {
                for (;;) {
                    const std::size_t idx = cursor.fetch_add(1);
                    if (idx >= jobs.size()) {
                        return;
                    }
                    execute(idx);
                }
            });
        }
        for (auto& worker : workers) {
            worker.join();
        }
    } else {
        for (std::size_t idx = 0; idx < jobs.size(); ++idx) {
            execute(idx);
        }
    }

    json run_docs = json::array();
    for (const BenchmarkRun& run : runs) {
        json doc = {
            {"algorithm", run.algo},
            {"n", run.n},
            {"rep", run.rep},
            {"seed", run.seed},
        };
        if (run.failed) {
            doc["error"] = run.error;
        } else {
            doc["final_objective"] = run.final_objective;
            doc["seconds"] = run.seconds;
            doc["seconds_per_iter"] = run.seconds_per_iter;
            doc["iterations"] = run.iterations;
            doc["dichotomy_seconds"] = run.dichotomy_seconds;
            doc["dichotomy_iters"] = run.dichotomy_iters;
            doc["trace_csv"] = run.trace_file;
        }
        run_docs.push_back(std::move(doc));
    }
    json report = {
        {"schema_version", 1},
        {"timing_contended", opt.parallel_runs > 1},
        {"config",
         {{"n_grid", opt.n_grid},
          {"reps", opt.reps},
          {"iters", opt.iters},
          {"algos", opt.algos},
          {"kind", opt.kind},
          {"k", opt.k},
          {"p", opt.p},
          {"laplacian_weight", opt.laplacian_weight},
          {"simplex_h", opt.simplex_h},
          {"seed", opt.seed}}},
        {"runs", run_docs},
    };
    write_text(dir / "report.json", report.dump(2));
    return kExitOk;
}

struct ValidateOptions {
    int samples = 1000;
    int instances = 20;
    int gkl_pairs = 10000;
    std::uint64_t seed = 1;
    std::string out = ".";
};

int cmd_validate(const ValidateOptions& opt) {
    const fs::path dir(opt.out);
    fs::create_directories(dir);

    const auto reports = certification_battery(opt.instances, opt.samples, opt.seed);
    json report_docs = json::array();
    for (const SurfaceReport& r : reports) {
        report_docs.push_back({{"surface", r.surface},
                               {"instance", r.instance},
                               {"samples", r.report.samples},
                               {"max_violation_A1", r.report.max_violation_A1},
                               {"max_gap_A2", r.report.max_gap_A2},
                               {"max_grad_mismatch_A3", r.report.max_grad_mismatch_A3}});
    }

    const NormGklStats gkl = norm_gkl_check(opt.gkl_pairs, opt.seed);
    const json gkl_doc = {
        {"pairs", gkl.pairs},
        {"violations_segment_max", gkl.violations_segment_max},
        {"worst_margin_segment", gkl.worst_margin_segment},
        {"violations_printed_max", gkl.violations_printed_max},
    };

    const TightnessGrid grid = fig_tightness_grid(50);
    {
        std::ofstream csv(dir / "tightness_fig2.csv");
        csv << "x0,x1,f,g_em,g_bregman,gap_em,gap_bregman\n";
        char buf[256];
        for (const TightnessRow& row : grid.rows) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                          row.x0, row.x1, row.f, row.g_em, row.g_bregman, row.g_em - row.f,
                          row.g_bregman - row.f);
            csv << buf;
        }
    }

    const CertifyTolerances tol;
    const bool certified = all_within(reports, tol);
    const bool gkl_ok = gkl.violations_segment_max == 0;
    const bool tightness_ok =
        grid.max_em_minus_bregman <= 1e-12 && grid.min_em_gap >= -1e-12;

    json summary = {
        {"schema_version", 1},
        {"samples", opt.samples},
        {"instances", opt.instances},
        {"certified", certified},
        {"norm_gkl", gkl_doc},
        {"tightness",
         {{"max_em_minus_bregman", grid.max_em_minus_bregman},
          {"min_em_gap", grid.min_em_gap},
          {"ok", tightness_ok}}},
        {"reports", report_docs},
    };
    write_text(dir / "majorization_report.json", summary.dump(2));

    std::cout << (certified ? "certification: pass" : "certification: FAIL") << "\n";
    std::cout << "norm-gkl (segment constant): "
              << (gkl_ok ? "pass" : "FAIL") << ", printed-constant violations: "
              << gkl.violations_printed_max << "/" << gkl.pairs << "\n";
    std::cout << (tightness_ok ? "tightness: pass" : "tightness: FAIL") << "\n";
    return certified && gkl_ok && tightness_ok ? kExitOk : kExitFailure;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"Regularized Poisson NMF: generalized MU/QU block updates, baselines, and a "
                 "synthetic experiment harness"};
    app.require_subcommand(1);

    GenerateOptions gen;
    CLI::App* cgen = app.add_subcommand("generate", "Generate a synthetic dataset");
    cgen->add_option("--kind", gen.kind)->check(CLI::IsMember({"uniform", "smooth"}));
    cgen->add_option("--n", gen.n)->check(CLI::PositiveNumber);
    cgen->add_option("--k", gen.k)->check(CLI::PositiveNumber);
    cgen->add_option("--p", gen.p)->check(CLI::Range(static_cast<Index>(2), static_cast<Index>(1 << 12)));
    cgen->add_option("--noise-lambda", gen.noise_lambda)->check(CLI::PositiveNumber);
    cgen->add_option("--seed", gen.seed);
    cgen->add_option("--out", gen.out)->required();

    SolveOptions sol;
    CLI::App* csol = app.add_subcommand("solve", "Run a solver on a dataset");
    csol->add_option("--input", sol.input);
    csol->add_option("--matrix", sol.matrix);
    csol->add_flag("--use-clean", sol.use_clean);
    csol->add_option("--algo", sol.algo)->check(CLI::IsMember({"mu", "qu", "bmd", "pgd"}));
    csol->add_option("--k", sol.k);
    csol->add_option("--epsilon", sol.epsilon)->check(CLI::PositiveNumber);
    csol->add_option("--laplacian-weight", sol.laplacian_weight);
    csol->add_option("--log-sparsity", sol.log_sparsity_alpha);
    csol->add_flag("--log-barrier", sol.barrier);
    csol->add_option("--simplex-h", sol.simplex_weights)->expected(0, 1);
    csol->add_option("--linesearch", sol.linesearch);
    csol->add_option("--max-iter", sol.max_iter)->check(CLI::NonNegativeNumber);
    csol->add_option("--rel-tol", sol.rel_tol);
    csol->add_option("--dichotomy-tol", sol.dichotomy_tol)->check(CLI::PositiveNumber);
    csol->add_option("--seed", sol.seed);
    csol->add_option("--trace-every", sol.trace_every)->check(CLI::PositiveNumber);
    csol->add_option("--out", sol.out)->required();

    BenchmarkOptions ben;
    CLI::App* cben = app.add_subcommand("benchmark", "Run the algorithm grid and time it");
    cben->add_option("--n-grid", ben.n_grid)->delimiter(',');
    cben->add_option("--reps", ben.reps)->check(CLI::PositiveNumber);
    cben->add_option("--iters", ben.iters)->check(CLI::PositiveNumber);
    cben->add_option("--algos", ben.algos)->delimiter(',');
    cben->add_option("--kind", ben.kind)->check(CLI::IsMember({"uniform", "smooth"}));
    cben->add_option("--k", ben.k)->check(CLI::PositiveNumber);
    cben->add_option("--p", ben.p)->check(CLI::Range(static_cast<Index>(2), static_cast<Index>(1 << 12)));
    cben->add_option("--noise-lambda", ben.noise_lambda)->check(CLI::PositiveNumber);
    cben->add_option("--laplacian-weight", ben.laplacian_weight);
    cben->add_flag("--simplex-h,!--no-simplex-h", ben.simplex_h);
    cben->add_option("--seed", ben.seed);
    cben->add_option("--parallel-runs", ben.parallel_runs)->check(CLI::PositiveNumber);
    cben->add_option("--out", ben.out)->required();

    ValidateOptions val;
    CLI::App* cval = app.add_subcommand("validate", "Certify the majorizing functions");
    cval->alias("validate-majorizers");
    cval->add_option("--samples", val.samples)->check(CLI::PositiveNumber);
    cval->add_option("--instances", val.instances)->check(CLI::PositiveNumber);
    cval->add_option("--gkl-pairs", val.gkl_pairs)->check(CLI::PositiveNumber);
    cval->add_option("--seed", val.seed);
    cval->add_option("--out", val.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    sol.simplex_h = csol->count("--simplex-h") > 0;

    try {
        if (cgen->parsed()) {
            return cmd_generate(gen);
        }
        if (csol->parsed()) {
            return cmd_solve(sol);
        }
        if (cben->parsed()) {
            return cmd_benchmark(ben);
        }
        if (cval->parsed()) {
            return cmd_validate(val);
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace pnmf
