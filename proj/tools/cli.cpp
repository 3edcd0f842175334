#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "lpflow/errors.hpp"
#include "lpflow/io.hpp"

namespace lpflow::cli {

namespace fs = std::filesystem;

namespace {

struct Context {
    RunConfig config;
    fs::path out_dir;
    std::ostream& out;
};

fs::path in_dir(const Context& ctx, const std::string& name)
{
    const fs::path p(name);
    return p.is_absolute() ? p : ctx.out_dir / p;
}

Trajectory load_trajectory(const Context& ctx)
{
    const fs::path p = ctx.out_dir / "trajectory.csv";
    std::ifstream in(p);
    if (!in) throw ConfigError("missing " + p.string() + "; run `simulate` first");
    return Trajectory::read_csv(in, ctx.config.pipeline.field);
}

void write_trajectory(const fs::path& p, const Trajectory& tr)
{
    std::ofstream out(p);
    if (!out) throw ConfigError("cannot write " + p.string());
    tr.write_csv(out);
}

Json header(const Context& ctx, const std::string& kind)
{
    return {{"schema_version", kSchemaVersion},
            {"kind", kind},
            {"field", field_to_json(ctx.config.pipeline.field)},
            {"seed", ctx.config.seed}};
}

// Measure-side data rebuilt from the stored cocycle.
MeasureSpectrum load_measure(const Context& ctx)
{
    MeasureSpectrum ms;
    ms.cocycle = cocycle_from_json(read_json(ctx.out_dir / "cocycle.json"));
    const auto& p = ctx.config.pipeline;
    ms.spectrum = benettin_spectrum(ms.cocycle, p.benettin);
    ms.split = oseledec_filtration(ms.cocycle, ms.spectrum, p.filtration);
    ms.split_group = stable_group_count(ms.spectrum);
    return ms;
}

std::string fmt(double v, int prec = 6)
{
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

std::string list(const std::vector<double>& v)
{
    std::string s = "{";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
    return s + "}";
}

int cmd_simulate(Context& ctx)
{
    const auto& p = ctx.config.pipeline;
    const Trajectory tr = simulate(p);
    write_trajectory(ctx.out_dir / "trajectory.csv", tr);
    Json j = header(ctx, "simulation");
    j["integrator"] = integrator_to_json(p.integrator);
    j["initial_point"] = vector_to_json(p.initial.size() ? p.initial : Vector::Ones(p.field.dimension()));
    j["transient"] = p.transient;
    j["duration"] = p.duration;
    j["sample_dt"] = p.sample_dt;
    j["samples"] = tr.size();
    j["trajectory_csv"] = "trajectory.csv";
    write_json(ctx.out_dir / "simulation.json", j);
    ctx.out << "simulate: " << tr.size() << " samples over " << p.duration << " time units\n";
    return kOk;
}

int cmd_spectrum(Context& ctx)
{
    const auto& p = ctx.config.pipeline;
    const Trajectory tr = load_trajectory(ctx);
    const PoincareConfig cfg = PoincareConfig::for_field(p.field, p.integrator);
    const CocycleSequence c = build_cocycle_along(p.field, tr, p.stride(), cfg);
    const LyapunovSpectrum s = benettin_spectrum(c, p.benettin);
    write_json(ctx.out_dir / "cocycle.json", cocycle_to_json(c));

    Json j = header(ctx, "lyapunov_spectrum");
    j["block_time"] = c.step;
    j["blocks"] = c.size();
    j["spectrum"] = spectrum_to_json(s);
    j["exponents"] = s.exponents;
    j["time_reversal"] = time_reversal_spectrum(s).exponents;
    Json ext = Json::array();
    for (int n : ctx.config.exterior_powers) {
        ext.push_back({{"n", n}, {"exponents", exterior_spectrum(c, n, p.benettin).exponents}});
    }
    j["exterior"] = ext;
    write_json(ctx.out_dir / "spectrum.json", j);
    ctx.out << "spectrum: " << list(s.exponents) << " over " << c.size() << " blocks, index " << index_of(s) << "\n";
    return kOk;
}

int cmd_domination(Context& ctx)
{
    const MeasureSpectrum ms = load_measure(ctx);
    Json j = header(ctx, "domination");
    j["spectrum"] = spectrum_to_json(ms.spectrum);
    j["splitting"] = {{"dims", ms.split.dims},
                      {"reliable_begin", ms.split.reliable_begin},
                      {"reliable_end", ms.split.reliable_end},
                      {"equivariance_residual", ms.split.equivariance_residual}};
    if (ms.spectrum.groups() < 2) {
        j["applicable"] = false;
        write_json(ctx.out_dir / "domination.json", j);
        ctx.out << "domination: a single exponent group, no splitting to test\n";
        return kOk;
    }
    // E = the first group, F = the rest; for a hyperbolic measure with one
    // stable group this is the stable/unstable split.
    const int split_group = std::max(1, ms.split_group);
    const DominationReport d = check_domination(ms.cocycle, ms.split, split_group, ctx.config.domination);
    j["applicable"] = true;
    j["split_group"] = split_group;
    j["domination"] = domination_to_json(d);
    Json cone = {{"found", false}};
    if (ms.split.groups() == 2) {
        // cones are tested at the block multiple that absorbs the domination constant
        const std::size_t n = d.satisfied ? cone_block_multiple(d, ms.cocycle.step) : 1;
        const auto found = search_invariant_cone(coarsen(ms.cocycle, n), coarsen(ms.split, n), ctx.config.cone_samples,
                                                 ctx.config.seed);
        cone["block_multiple"] = n;
        if (found) {
            cone["found"] = true;
            cone["rho"] = found->rho;
            cone["gamma"] = found->gamma;
        }
    } else {
        cone["note"] = "cone search needs exactly two exponent groups";
    }
    j["cone"] = cone;
    write_json(ctx.out_dir / "domination.json", j);
    ctx.out << "domination: " << (d.satisfied ? "dominated" : "not dominated") << " (lambda " << fmt(d.lambda)
            << ", C " << fmt(d.constant) << "), invariant cone " << (cone["found"].get<bool>() ? "found" : "not found")
            << "\n";
    return kOk;
}

int cmd_scan(Context& ctx)
{
    const auto& p = ctx.config.pipeline;
    const Trajectory tr = load_trajectory(ctx);
    const MeasureSpectrum ms = load_measure(ctx);
    const ScanResult r = scan_returns(p, tr, ms);
    const NearReturnOptions ro = return_options(p);

    Json j = header(ctx, "scan");
    j["block_time"] = ms.cocycle.step;
    j["stride"] = p.stride();
    j["pesin"] = {{"eta", p.pesin.eta}, {"C", p.pesin.C}, {"horizon", p.pesin.horizon}};
    j["blocks_tested"] = r.blocks.size();
    j["members"] = r.members;
    Json certs = Json::array();
    for (const auto& c : r.certificates) certs.push_back(certificate_to_json(c));
    j["strings"] = {{"eta", p.string_eta}, {"gap", p.string_gap}, {"certificates", certs},
                    {"verification_failures", r.certificate_failures}};
    Json cands = Json::array();
    for (std::size_t k = 0; k < r.candidates.size(); ++k) cands.push_back(candidate_to_json(r.candidates[k], k, tr));
    const std::size_t per_tier =
        (p.max_closures + ctx.config.period_tiers.size() - 1) / std::max<std::size_t>(1, ctx.config.period_tiers.size());
    const auto selected = select_by_period(r.candidates, tr, ctx.config.period_tiers, ro.min_separation, per_tier);
    j["returns"] = {{"D_rel", ro.D_rel},
                    {"min_separation", ro.min_separation},
                    {"max_separation", ro.max_separation},
                    {"candidates", cands},
                    {"selected", selected},
                    {"verification_failures", r.candidate_failures}};
    write_json(ctx.out_dir / "scan.json", j);
    ctx.out << "scan: " << r.members.size() << "/" << r.blocks.size() << " blocks in the Pesin block, "
            << r.certificates.size() << " string certificates, " << r.candidates.size() << " near returns ("
            << selected.size() << " selected), re-check failures " << r.certificate_failures + r.candidate_failures
            << "\n";
    return r.certificate_failures + r.candidate_failures == 0 ? kOk : kNumerical;
}

// Returns true when the orbit closed and its shadowing check passed.
bool close_one(Context& ctx, const Trajectory& tr, const Json& cand_json)
{
    const auto& p = ctx.config.pipeline;
    const std::size_t id = cand_json.at("id").get<std::size_t>();
    const ReturnCandidate cand = candidate_from_json(cand_json);
    const ClosureAttempt a = close_candidate(p, tr, cand);
    const std::string stem = "orbit_" + std::to_string(id);

    Json j = header(ctx, "periodic_orbit");
    j["id"] = id;
    j["candidate"] = cand_json;
    j["closed"] = a.closed && a.failure.empty();
    j["failure"] = a.failure;
    if (a.closed) {
        j["orbit"] = orbit_to_json(a.orbit);
        j["period"] = a.orbit.period;
        write_trajectory(ctx.out_dir / (stem + ".csv"), a.orbit.samples);
        j["samples_csv"] = stem + ".csv";
    }
    if (a.closed && a.failure.empty()) {
        j["theta"] = {{"phase", a.theta.phase}, {"min_slope", a.theta.min_slope}, {"max_slope", a.theta.max_slope}};
        j["shadowing"] = shadowing_to_json(a.shadowing);
        j["spectrum"] = spectrum_to_json(a.spectrum.spectrum);
        j["spectrum"]["hyperbolic"] = a.spectrum.hyperbolic;
        j["spectrum"]["schur_converged"] = a.spectrum.schur_converged;
    }
    write_json(ctx.out_dir / (stem + ".json"), j);
    ctx.out << "close " << id << ": ";
    if (a.closed && a.failure.empty()) {
        ctx.out << "period " << fmt(a.orbit.period, 10) << ", shadowing " << (a.shadowing.pass ? "passes" : "fails")
                << ", spectrum " << list(a.spectrum.spectrum.exponents) << "\n";
    } else {
        ctx.out << a.failure << "\n";
    }
    return a.closed && a.failure.empty() && a.shadowing.pass;
}

int cmd_close(Context& ctx, const std::string& which)
{
    const Trajectory tr = load_trajectory(ctx);
    const Json scan = read_json(ctx.out_dir / "scan.json");
    const Json& cands = scan.at("returns").at("candidates");
    std::vector<std::size_t> ids;
    if (which == "selected") {
        ids = scan.at("returns").at("selected").get<std::vector<std::size_t>>();
    } else {
        std::size_t pos = 0;
        long long id = -1;
        try {
            id = std::stoll(which, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != which.size() || id < 0) throw ConfigError("--candidate must be a candidate id or 'selected'");
        if (static_cast<std::size_t>(id) >= cands.size()) throw ConfigError("no candidate with id " + which);
        ids.push_back(static_cast<std::size_t>(id));
    }
    if (ids.empty()) throw ClosingError("no candidates to close");
    std::size_t good = 0;
    for (std::size_t id : ids) good += close_one(ctx, tr, cands.at(id));
    return good > 0 ? kOk : kPipeline;
}

std::vector<fs::path> orbit_files(const Context& ctx)
{
    std::vector<fs::path> files;
    if (!ctx.config.orbit_files.empty()) {
        for (const auto& f : ctx.config.orbit_files) files.push_back(in_dir(ctx, f));
        return files;
    }
    std::vector<std::pair<long, fs::path>> found;
    for (const auto& e : fs::directory_iterator(ctx.out_dir)) {
        const std::string name = e.path().filename().string();
        if (name.rfind("orbit_", 0) == 0 && e.path().extension() == ".json") {
            found.emplace_back(std::stol(name.substr(6)), e.path());
        }
    }
    std::sort(found.begin(), found.end());
    for (auto& f : found) files.push_back(f.second);
    return files;
}

int cmd_compare(Context& ctx)
{
    const RunConfig& rc = ctx.config;
    const fs::path measure_path = in_dir(ctx, rc.measure_file);
    const Json measure_json = read_json(measure_path);
    const LyapunovSpectrum mu_spec = LyapunovSpectrum::from_exponents(exponents_from_json(measure_json));

    // The empirical measure is only available when the trajectory is on disk.
    std::optional<Trajectory> traj;
    if (fs::exists(ctx.out_dir / "trajectory.csv")) traj = load_trajectory(ctx);
    std::optional<EmpiricalMeasure> mu;
    std::optional<TestFunctionFamily> family;
    if (traj) {
        mu = empirical_measure(*traj);
        const auto& box = rc.pipeline.integrator.box;
        family = box.bounded() ? TestFunctionFamily(box, rc.pipeline.family_size)
                               : TestFunctionFamily::around(traj->states, rc.pipeline.family_size);
    }

    Json entries = Json::array();
    std::optional<std::size_t> best;
    double best_score = 0.0;
    std::vector<std::pair<double, double>> period_dm;  // (period, d_M)
    std::ostringstream text;
    text << "measure spectrum " << list(mu_spec.exponents) << " from " << measure_path.filename().string() << "\n";

    for (const auto& file : orbit_files(ctx)) {
        const Json oj = read_json(file);
        if (oj.contains("closed") && !oj.at("closed").get<bool>()) {
            text << file.filename().string() << ": not closed (" << oj.value("failure", std::string()) << ")\n";
            continue;
        }
        const LyapunovSpectrum orbit_spec = LyapunovSpectrum::from_exponents(exponents_from_json(oj));
        ComparisonReport rep = compare_spectra(mu_spec, orbit_spec, rc.compare_eps);
        std::optional<double> period;
        if (oj.contains("period")) period = oj.at("period").get<double>();
        if (mu && period && oj.contains("samples_csv")) {
            std::ifstream in(in_dir(ctx, oj.at("samples_csv").get<std::string>()));
            if (!in) throw ConfigError("missing orbit samples for " + file.string());
            PeriodicOrbit orbit;
            orbit.period = *period;
            orbit.samples = Trajectory::read_csv(in, rc.pipeline.field);
            attach_weak_star(rep, *mu, periodic_measure(orbit), *family, rc.weak_eps);
            period_dm.emplace_back(*period, *rep.weak_star);
        }
        const bool shadow = !oj.contains("shadowing") || oj.at("shadowing").at("pass").get<bool>();
        Json e = {{"orbit_file", file.filename().string()}, {"shadowing_pass", shadow}, {"report", comparison_to_json(rep)}};
        if (period) e["period"] = *period;
        // relative score used to pick the best orbit: max_i gap_i / (1 + |lambda_i(mu)|)
        double score = 0.0;
        for (std::size_t i = 0; i < rep.gaps.size(); ++i) {
            score = std::max(score, rep.gaps[i] / (1.0 + std::abs(rep.measure_spectrum[i])));
        }
        e["relative_gap"] = score;
        if (shadow && (!best || score < best_score)) {
            best = entries.size();
            best_score = score;
        }
        text << file.filename().string() << ": ";
        if (period) text << "period " << fmt(*period) << ", ";
        text << "spectrum " << list(rep.orbit_spectrum) << ", gaps " << list(rep.gaps)
             << (rep.spectrum_pass ? " < " : " not all < ") << rc.compare_eps;
        if (rep.weak_star) text << ", d_M " << fmt(*rep.weak_star);
        text << (shadow ? "" : " [shadowing failed]") << "\n";
        entries.push_back(e);
    }

    Json tiers = Json::array();
    for (double bound : rc.period_tiers) {
        std::optional<double> m;
        std::size_t count = 0;
        for (const auto& [per, dm] : period_dm) {
            if (per <= bound) {
                ++count;
                m = m ? std::min(*m, dm) : dm;
            }
        }
        tiers.push_back({{"max_period", bound}, {"orbits", count}, {"min_weak_star", m ? Json(*m) : Json(nullptr)}});
        text << "orbits with period <= " << bound << ": " << count;
        if (m) text << ", min d_M " << fmt(*m);
        text << "\n";
    }

    Json j = header(ctx, "comparison");
    j["measure_file"] = measure_path.filename().string();
    j["measure_spectrum"] = mu_spec.exponents;
    j["eps"] = rc.compare_eps;
    j["weak_eps"] = rc.weak_eps;
    j["entries"] = entries;
    j["tiers"] = tiers;
    j["best"] = best ? Json(*best) : Json(nullptr);
    if (best) {
        const Json& r = entries[*best].at("report");
        text << "best: " << entries[*best].at("orbit_file").get<std::string>() << ", gaps "
             << list(r.at("gaps").get<std::vector<double>>()) << ", "
             << (r.at("spectrum_pass").get<bool>() ? "within" : "not within") << " eps " << rc.compare_eps << "\n";
    } else {
        text << "best: none (no orbit with a passing shadowing check)\n";
    }
    write_json(ctx.out_dir / "comparison.json", j);
    {
        std::ofstream t(ctx.out_dir / "comparison.txt");
        t << text.str();
    }
    ctx.out << text.str();
    return best ? kOk : kPipeline;
}

int exit_code_for(const Error& e)
{
    switch (e.kind()) {
    case ErrorKind::Configuration: return kConfig;
    case ErrorKind::Numerical: return kNumerical;
    case ErrorKind::Pipeline: return kPipeline;
    }
    return kOther;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Linear Poincare flow toolkit: long-run spectra, Pesin blocks, closed orbits, measure comparison"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir;
    int threads = 1;
    std::string candidate;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "run configuration (JSON)")->required();
        sub->add_option("--threads", threads, "worker cap")->check(CLI::PositiveNumber);
        sub->add_option("--out", out_dir, "output directory (overrides output_dir in the config)");
    };
    std::map<std::string, CLI::App*> subs;
    for (const char* name : {"simulate", "spectrum", "domination", "scan", "close", "compare"}) {
        subs[name] = app.add_subcommand(name);
        add_common(subs[name]);
    }
    subs["simulate"]->description("integrate the long run and write trajectory.csv");
    subs["spectrum"]->description("Benettin spectrum of the scaled linear Poincare flow; writes cocycle.json, spectrum.json");
    subs["domination"]->description("Oseledec splitting, domination and cone checks; writes domination.json");
    subs["scan"]->description("Pesin blocks, quasi-hyperbolic strings, near returns; writes scan.json");
    subs["close"]->description("close near returns to periodic orbits; writes orbit_<id>.json/.csv");
    subs["close"]->add_option("--candidate", candidate, "candidate id from scan.json, or 'selected'")->required();
    subs["compare"]->description("compare the measure spectrum with closed orbits; writes comparison.json/.txt");

    std::vector<std::string> argv_store{"lpflow"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return kConfig;
    }

    try {
        Context ctx{load_config(config_path), {}, out};
        ctx.out_dir = out_dir.empty() ? ctx.config.output_dir : fs::path(out_dir);
        fs::create_directories(ctx.out_dir);
        // Every stage currently runs on one worker, which satisfies any cap.
        (void)threads;
        if (subs["simulate"]->parsed()) return cmd_simulate(ctx);
        if (subs["spectrum"]->parsed()) return cmd_spectrum(ctx);
        if (subs["domination"]->parsed()) return cmd_domination(ctx);
        if (subs["scan"]->parsed()) return cmd_scan(ctx);
        if (subs["close"]->parsed()) return cmd_close(ctx, candidate);
        if (subs["compare"]->parsed()) return cmd_compare(ctx);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const Json::exception& e) {
        err << "error: malformed input file: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kOther;
    }
    return kOther;
}

}  // namespace lpflow::cli
