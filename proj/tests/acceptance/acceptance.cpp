// Runs every acceptance criterion and prints one PASS/FAIL line for each.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "../support/oracles.hpp"
#include "../support/tempdir.hpp"
#include "protokd/complexity.hpp"
#include "protokd/distill.hpp"
#include "protokd/io.hpp"
#include "protokd/metrics.hpp"
#include "protokd/pipeline.hpp"
#include "protokd/prototype.hpp"
#include "protokd/rsflag.hpp"
#include "protokd/student.hpp"

using namespace protokd;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---- golden ----

Outcome c01_param_count() {
    Outcome o;
    const auto b = complexity::reference_budget();
    const auto t0 = Clock::now();
    const auto n = complexity::prompt_param_count(b);
    const double dt = seconds_since(t0);
    o.require(n == 98'304, "got " + std::to_string(n));
    o.require(dt < 1e-3, fmt("took %.3g s", dt));
    if (o.ok) o.detail = "98304 params";
    return o;
}

Outcome c02_overheads() {
    Outcome o;
    const double a1 = complexity::attention_overhead(49, 8), a2 = complexity::attention_overhead(77, 4);
    const double m1 = complexity::mlp_overhead(49, 8), m2 = complexity::mlp_overhead(77, 4);
    o.require(a1 >= 0.3525 && a1 <= 0.3531, fmt("attn(49,8) = %.5f", a1));
    o.require(a2 >= 0.1062 && a2 <= 0.1068, fmt("attn(77,4) = %.5f", a2));
    o.require(m1 >= 0.1630 && m1 <= 0.1636, fmt("mlp(49,8) = %.5f", m1));
    o.require(m2 >= 0.0516 && m2 <= 0.0522, fmt("mlp(77,4) = %.5f", m2));
    o.detail = fmt("attn %.5f %.5f, mlp %.5f %.5f", a1, a2, m1, m2);
    return o;
}

Outcome c03_harmonic_mean() {
    Outcome o;
    const double r = metrics::harmonic_mean(93.90, 83.17), a = metrics::harmonic_mean(95.80, 71.85);
    o.require(std::abs(r - 88.21) <= 0.01, fmt("RESISC %.4f", r));
    o.require(std::abs(a - 82.11) <= 0.02, fmt("AID %.4f", a));
    if (o.ok) o.detail = fmt("%.4f %.4f", r, a);
    return o;
}

Outcome c04_mean_recall() {
    Outcome o;
    const double m = metrics::mean_recall({33.17, 54.46, 69.18}, {26.09, 59.22, 75.41});
    o.require(std::abs(m - 52.92) <= 0.01, fmt("mR %.4f", m));
    if (o.ok) o.detail = fmt("mR %.4f", m);
    return o;
}

Outcome c05_rsflag() {
    Outcome o;
    const rsflag::RsFlagRuleset r;
    o.require(rsflag::assign_flag(
                  "An aerial view of an airport showing multiple long paved runways and taxiways", r) == 1,
              "airport caption");
    o.require(rsflag::assign_flag(
                  "A massive concrete ring structure surrounding a rectangular green field", r) == 0,
              "stadium caption");
    const auto pad = [](const std::string& lead, int n) {
        std::string s = lead;
        for (int w = rsflag::word_count(lead); w < n; ++w) s += " tile";
        return s;
    };
    int cases = 0;
    for (const auto& p : r.positive_tokens) {
        const std::string lead = "scene in " + p;
        for (int n : {5, 6, 20, 21}) {
            const int want = (n >= 6 && n <= 20) ? 1 : 0;
            o.require(rsflag::assign_flag(pad(lead, n), r) == want, "positive '" + p + "' at " + std::to_string(n));
            ++cases;
        }
        for (const auto& neg : r.negative_tokens) {
            o.require(rsflag::assign_flag(pad(lead + " " + neg, 8), r) == 0, p + " with " + neg);
            ++cases;
        }
    }
    for (int n : {5, 6, 20, 21}) {
        o.require(rsflag::assign_flag(pad("plain scene", n), r) == 0, "no positive token");
        ++cases;
    }
    if (o.ok) o.detail = std::to_string(cases + 2) + " fixtures";
    return o;
}

// ---- properties ----

Outcome c06_mad_pruning() {
    Outcome o;
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1, 1);
    const auto t0 = Clock::now();
    prototype::AggregationConfig cfg;
    for (int t = 0; t < 500 && o.ok; ++t) {
        Vec s(1 + rng() % 64);
        const bool coarse = t % 4 == 0;  // coarse grid makes ties and zero MAD common
        for (double& x : s) x = coarse ? std::round(4 * u(rng)) / 4 : u(rng);
        if (t % 7 == 0) s[rng() % s.size()] += 5;
        const auto got = prototype::prune(s, cfg).kept;
        const auto ref = oracle::robust(s, cfg.zeta, cfg.epsilon).kept;
        o.require(got == ref, "instance " + std::to_string(t));
    }
    const double dt = seconds_since(t0);
    o.require(dt < 5.0, fmt("took %.2f s", dt));
    if (o.ok) o.detail = fmt("500 instances in %.3f s", dt);
    return o;
}

Outcome c07_aggregation() {
    Outcome o;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1, 1);
    const int n_inst = 200;
    for (int t = 0; t < n_inst && o.ok; ++t) {
        const std::size_t n = 2 + rng() % 30, d = 2 + rng() % 10;
        prototype::AggregationConfig cfg;
        cfg.beta = 0.5 + 20 * (u(rng) + 1) / 2;
        cfg.gamma = 0.1 + 3 * (u(rng) + 1) / 2;
        Vec s(n);
        std::vector<int> fl(n);
        for (std::size_t j = 0; j < n; ++j) {
            s[j] = u(rng);
            fl[j] = static_cast<int>(rng() % 2);
        }
        const auto kept = prototype::prune(s, cfg).kept;
        const std::string at = " (instance " + std::to_string(t) + ")";

        const Vec w = prototype::candidate_weights(s, fl, kept, cfg);
        o.require(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) <= 1e-9, "weight sum" + at);

        // equal scores, one flag set
        const double v = u(rng);
        const Vec w2 = prototype::candidate_weights(Vec{v, v}, std::vector<int>{0, 1}, {0, 1}, cfg);
        o.require(w2[1] > w2[0], "flag monotonicity" + at);

        prototype::AggregationConfig flat = cfg;
        flat.gamma = 0;
        const Vec w0 = prototype::candidate_weights(s, fl, kept, flat);
        Vec z;
        for (int j : kept) z.push_back(cfg.beta * s[j]);
        const Vec ref = oracle::naive_softmax(z);
        std::size_t i = 0;
        for (int j : kept) o.require(std::abs(w0[j] - ref[i++]) <= 1e-9, "gamma=0 softmax" + at);

        // beta = 1e4 with a clear winner among kept logits
        prototype::AggregationConfig sharp = cfg;
        sharp.beta = 1e4;
        Vec logits;
        for (int j : kept) logits.push_back(sharp.beta * s[j] + sharp.gamma * fl[j]);
        std::vector<double> sorted = logits;
        std::sort(sorted.rbegin(), sorted.rend());
        if (sorted.size() > 1 && sorted[0] - sorted[1] < 15) {
            --t;  // draw a fresh instance instead
            continue;
        }
        const Vec ws = prototype::candidate_weights(s, fl, kept, sharp);
        o.require(*std::max_element(ws.begin(), ws.end()) >= 0.999, "beta concentration" + at);
        const int arg = *std::next(kept.begin(), std::max_element(logits.begin(), logits.end()) - logits.begin());
        o.require(ws[arg] >= 0.999, "beta argmax" + at);

        // full aggregation: unit prototype and permutation equivariance
        std::vector<Vec> feats;
        for (int f = 0; f < 3; ++f) feats.push_back(oracle::random_unit(rng, d));
        std::vector<rsflag::CaptionCandidate> cands;
        for (std::size_t j = 0; j < n; ++j)
            cands.push_back({0, static_cast<int>(j), "c", fl[j], oracle::random_unit(rng, d)});
        const auto p = prototype::aggregate_class(feats, cands, cfg);
        o.require(is_unit(p.prototype, 1e-9), "unit prototype" + at);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<rsflag::CaptionCandidate> shuffled;
        for (std::size_t j : perm) shuffled.push_back(cands[j]);
        const auto q = prototype::aggregate_class(feats, shuffled, cfg);
        for (std::size_t j = 0; j < n; ++j)
            o.require(std::abs(q.weights[j] - p.weights[perm[j]]) <= 1e-12, "permuted weights" + at);
        for (std::size_t k = 0; k < d; ++k)
            o.require(std::abs(q.prototype[k] - p.prototype[k]) <= 1e-12, "permuted prototype" + at);
    }
    if (o.ok) o.detail = std::to_string(n_inst) + " instances x 6 properties";
    return o;
}

Outcome c08_masked_kd() {
    Outcome o;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int t = 0; t < 300 && o.ok; ++t) {
        const std::size_t b = 1 + rng() % 6, c = 2 + rng() % 8;
        std::set<int> base;
        for (std::size_t k = 0; k < c; ++k)
            if (rng() % 2) base.insert(static_cast<int>(k));
        if (base.empty()) base.insert(0);
        distill::LogitMatrix tl, sl;
        tl.values = Matrix(b, c);
        sl.values = Matrix(b, c);
        for (double& x : tl.values.data) x = u(rng);
        for (double& x : sl.values.data) x = u(rng);
        const double tau = 0.5 + (u(rng) + 5) / 2;
        const Matrix m = distill::masked_distribution(sl, base, tau);
        for (std::size_t i = 0; i < b; ++i) {
            double mass = 0;
            for (std::size_t k = 0; k < c; ++k) {
                if (base.count(static_cast<int>(k))) {
                    mass += m(i, k);
                } else {
                    o.require(m(i, k) == 0.0, "novel column not exactly zero");
                }
            }
            o.require(std::abs(mass - 1.0) <= 1e-9, "base mass");
        }
        o.require(std::abs(distill::loss_logit(sl, sl, base, tau)) <= 1e-12, "identical logits");
        const double before = distill::loss_logit(tl, sl, base, tau);
        for (std::size_t i = 0; i < b; ++i) {
            const double shift = 10 * u(rng);
            for (std::size_t k = 0; k < c; ++k) {
                tl.values(i, k) += shift;
                sl.values(i, k) += shift;
            }
        }
        o.require(std::abs(distill::loss_logit(tl, sl, base, tau) - before) <= 1e-9, "row shift");
    }
    if (o.ok) o.detail = "300 instances";
    return o;
}

Outcome c09_gradients() {
    Outcome o;
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0, 1);
    const auto t0 = Clock::now();
    const double h = 1e-5;
    long coords = 0;
    double worst = 0;
    const int configs = 24;
    for (int t = 0; t < configs && o.ok; ++t) {
        student::ToyEncoderConfig v;
        v.dim = 2 + static_cast<int>(rng() % 15);
        v.seq_len = 1 + static_cast<int>(rng() % 6);
        v.prompt_tokens = 1 + static_cast<int>(rng() % 4);
        v.layers = 1 + static_cast<int>(rng() % 2);
        v.ff_mult = 1 + static_cast<int>(rng() % 2);
        v.seed = rng();
        auto tx = v;
        tx.seed = rng();
        tx.prompt_tokens = 1 + static_cast<int>(rng() % 4);
        auto s = student::init_student(v, tx, 0.5 + std::abs(g(rng)));
        for (auto* enc : {&s.vision, &s.text})
            for (auto& p : enc->prompts)
                for (double& x : p.data) x = 0.5 * g(rng);

        const int c = 2 + static_cast<int>(rng() % 4);
        const int b = 1 + static_cast<int>(rng() % 4);
        student::TrainingSet ts;
        const auto tokens = [&] {
            Matrix m(v.seq_len, v.dim);
            for (double& x : m.data) x = g(rng);
            return m;
        };
        for (int i = 0; i < b; ++i) {
            ts.image_tokens.push_back(tokens());
            ts.teacher_image.push_back(oracle::random_unit(rng, v.dim));
            ts.labels.push_back(static_cast<int>(rng() % c));
        }
        for (int k = 0; k < c; ++k) {
            ts.classes.push_back(k);
            ts.class_tokens.push_back(tokens());
            if (k == 0 || rng() % 3) ts.prototypes[k] = oracle::random_unit(rng, v.dim);
        }
        distill::DistillConfig cfg;
        cfg.lambda_img = std::abs(g(rng));
        cfg.lambda_text = std::abs(g(rng));
        cfg.lambda_logit = std::abs(g(rng));
        cfg.tau = 0.5 + std::abs(g(rng)) * 2;
        cfg.tau_t = 0.5 + std::abs(g(rng)) * 5;
        const long total = 10, step = static_cast<long>(rng() % 10);
        std::vector<std::size_t> batch(b);
        std::iota(batch.begin(), batch.end(), 0);

        const auto res = student::backward(s, ts, batch, cfg, step, total, student::ExecPolicy::Serial);
        const auto f = [&] { return student::evaluate_loss(s, ts, batch, cfg, step, total).total; };
        const auto probe = [&](double& slot, double analytic, const std::string& name) {
            const double keep = slot;
            slot = keep + h;
            const double up = f();
            slot = keep - h;
            const double dn = f();
            slot = keep;
            const double fd = (up - dn) / (2 * h);
            const double err = std::abs(analytic - fd);
            const double rel = err / std::max(std::abs(analytic), std::abs(fd));
            ++coords;
            if (std::max(std::abs(analytic), std::abs(fd)) > 1e-6) worst = std::max(worst, rel);
            if (err > 1e-7) {
                o.require(rel <= 1e-4, name + fmt(" analytic %.6g fd %.6g", analytic, fd) +
                                           " (config " + std::to_string(t) + ")");
            }
        };
        for (std::size_t l = 0; l < s.vision.prompts.size(); ++l)
            for (std::size_t i = 0; i < s.vision.prompts[l].data.size(); ++i)
                probe(s.vision.prompts[l].data[i], res.grads.vision_prompts[l].data[i],
                      "vision prompt " + std::to_string(l) + "/" + std::to_string(i));
        for (std::size_t l = 0; l < s.text.prompts.size(); ++l)
            for (std::size_t i = 0; i < s.text.prompts[l].data.size(); ++i)
                probe(s.text.prompts[l].data[i], res.grads.text_prompts[l].data[i],
                      "text prompt " + std::to_string(l) + "/" + std::to_string(i));
        probe(s.tau_s, res.grads.tau_s, "tau_s");
    }
    const double dt = seconds_since(t0);
    o.require(dt < 60.0, fmt("took %.1f s", dt));
    if (o.ok)
        o.detail = std::to_string(configs) + " configs, " + std::to_string(coords) +
                   fmt(" coords, worst rel %.2g, %.2f s", worst, dt);
    return o;
}

Outcome c10_flops() {
    Outcome o;
    int pairs = 0;
    for (std::uint64_t n = 1; n <= 128 && o.ok; ++n) {
        student::ToyEncoderConfig c;
        c.dim = 1;
        c.layers = 1;
        c.seq_len = static_cast<int>(n);
        c.prompt_tokens = 0;
        const std::uint64_t a0 = student::count_multiply_adds(c).attention;
        o.require(a0 == 2 * n * n, "baseline count at n=" + std::to_string(n));
        for (std::uint64_t p = 0; p <= 32; ++p) {
            c.prompt_tokens = static_cast<int>(p);
            const std::uint64_t ap = student::count_multiply_adds(c).attention;
            // (ap - a0) / a0 == ((n+p)^2 - n^2) / n^2, cross-multiplied
            const std::uint64_t lhs = (ap - a0) * n * n;
            const std::uint64_t rhs = a0 * ((n + p) * (n + p) - n * n);
            o.require(lhs == rhs, "n=" + std::to_string(n) + " p=" + std::to_string(p));
            // and 2p/n + (p/n)^2 in the same rational form
            o.require((ap - a0) * n * n == a0 * (2 * p * n + p * p), "closed form");
            const double ratio = static_cast<double>(ap - a0) / static_cast<double>(a0);
            o.require(std::abs(ratio - complexity::attention_overhead(static_cast<std::int64_t>(n),
                                                                      static_cast<std::int64_t>(p))) <= 1e-12,
                      "library formula");
            ++pairs;
        }
    }
    if (o.ok) o.detail = std::to_string(pairs) + " (n, p) pairs";
    return o;
}

Outcome c11_warmup() {
    Outcome o;
    for (double lam : {1.0, 0.7}) {
        distill::DistillConfig cfg;
        cfg.lambda_logit = lam;
        cfg.warmup_fraction = 0.3;
        for (long T = 1; T <= 1000 && o.ok; ++T) {
            const long w = (3 * T + 9) / 10;  // ceil(0.3 T) in integers
            const std::string at = " at T=" + std::to_string(T);
            o.require(distill::effective_lambda_logit(0, T, cfg) == 0.0, "nonzero at step 0" + at);
            double prev = 0.0;
            for (long s = 1; s < T; ++s) {
                const double e = distill::effective_lambda_logit(s, T, cfg);
                if (s >= w) {
                    o.require(e == lam, "not full after warm-up" + at);
                } else {
                    o.require(std::abs(e - lam * static_cast<double>(s) / static_cast<double>(w)) <= 1e-12,
                              "not linear" + at);
                }
                o.require(e >= prev, "not monotone" + at);
                prev = e;
            }
        }
    }
    if (o.ok) o.detail = "T = 1..1000, two lambda values";
    return o;
}

Outcome c12_ablation() {
    Outcome o;
    const auto t0 = Clock::now();
    TempDir tmp("accept-ablation");
    const fs::path cfgdir = PROTOKD_CONFIG_DIR;
    const fs::path data = tmp.path / "data";
    std::map<std::string, nlohmann::ordered_json> rep;
    auto ctx = pipeline::make_context(cfgdir / "B7.json", std::nullopt, data);
    pipeline::cmd_gen_synth(ctx);
    pipeline::cmd_flag(ctx);
    pipeline::cmd_aggregate(ctx);
    for (const std::string name : {"B0", "B7"}) {
        auto run = pipeline::make_context(cfgdir / (name + ".json"), std::nullopt, tmp.path / name, data);
        pipeline::cmd_train(run);
        rep[name] = pipeline::cmd_eval(run, pipeline::EvalMode::Base2Novel);
    }
    const auto& a = rep["B0"];
    const auto& b = rep["B7"];
    const double dt = seconds_since(t0);
    const std::string summary =
        fmt("B0 base/novel/HM %.1f/%.1f/%.1f", a["base"].get<double>(), a["novel"].get<double>(), a["hm"].get<double>()) +
        fmt(", B7 %.1f/%.1f/%.1f", b["base"].get<double>(), b["novel"].get<double>(), b["hm"].get<double>()) +
        fmt(", %.1f s", dt);
    o.require(b["novel"].get<double>() >= a["novel"].get<double>(), "novel(B7) < novel(B0): " + summary);
    o.require(b["hm"].get<double>() >= a["hm"].get<double>(), "HM(B7) < HM(B0): " + summary);
    o.require(dt < 120.0, "too slow: " + summary);
    if (o.ok) o.detail = summary;
    return o;
}

Outcome c13_retrieval() {
    Outcome o;
    std::mt19937_64 rng(13);
    for (int t = 0; t < 100 && o.ok; ++t) {
        const std::size_t nq = 1 + rng() % 30, ng = 1 + rng() % 100, d = 2 + rng() % 12;
        std::vector<Vec> q, g;
        for (std::size_t i = 0; i < nq; ++i) q.push_back(oracle::random_unit(rng, d));
        for (std::size_t j = 0; j < ng; ++j) {
            // occasional exact duplicates exercise the tie rule
            g.push_back(j > 0 && rng() % 5 == 0 ? g[rng() % j] : oracle::random_unit(rng, d));
        }
        std::vector<std::set<int>> rel(nq);
        for (auto& r : rel)
            for (std::size_t m = 0; m < 1 + rng() % 4; ++m) r.insert(static_cast<int>(rng() % ng));
        o.require(metrics::retrieval_eval(q, g, rel) == oracle::recall_by_sort(q, g, rel, {1, 5, 10}),
                  "instance " + std::to_string(t));
    }

    TempDir tmp("accept-gallery");
    auto ctx = pipeline::make_context(std::nullopt, std::nullopt, tmp.path);
    ctx.cfg.train.epochs = 20;
    pipeline::cmd_gen_synth(ctx);
    const auto tg = tmp.path / "text_gallery.jsonl", ig = tmp.path / "image_gallery.jsonl";
    const std::string tb = io::read_bytes(tg), ib = io::read_bytes(ig);
    pipeline::cmd_flag(ctx);
    pipeline::cmd_aggregate(ctx);
    pipeline::cmd_train(ctx);
    const auto rep = pipeline::cmd_eval(ctx, pipeline::EvalMode::Retrieval);
    o.require(io::read_bytes(tg) == tb, "text gallery changed");
    o.require(io::read_bytes(ig) == ib, "image gallery changed");
    o.require(rep["gallery_digests"]["text"] == io::file_digest(tg), "reported digest mismatch");
    if (o.ok) o.detail = fmt("100 oracle instances; galleries unchanged (mR %.2f)", rep["mR"].get<double>());
    return o;
}

Outcome c14_determinism() {
    Outcome o;
    TempDir tmp("accept-determinism");
    const fs::path cfg = fs::path(PROTOKD_CONFIG_DIR) / "B7.json";
    std::vector<std::string> dumps[2];
    for (int r = 0; r < 2; ++r) {
        const fs::path dir = tmp.path / ("run" + std::to_string(r));
        const auto ctx = pipeline::make_context(cfg, std::uint64_t{3}, dir);
        dumps[r].push_back(pipeline::cmd_gen_synth(ctx).dump());
        dumps[r].push_back(pipeline::cmd_flag(ctx).dump());
        dumps[r].push_back(pipeline::cmd_aggregate(ctx).dump());
        dumps[r].push_back(pipeline::cmd_train(ctx).dump());
        for (auto m : {pipeline::EvalMode::Base2Novel, pipeline::EvalMode::FewShot, pipeline::EvalMode::Retrieval})
            dumps[r].push_back(pipeline::cmd_eval(ctx, m).dump());
    }
    o.require(dumps[0] == dumps[1], "command reports differ");
    int files = 0;
    for (const char* name : {"report_base2novel.json", "report_fewshot.json", "report_retrieval.json",
                             "prototypes.json", "captions_flagged.json", "checkpoint.json", "loss_log.jsonl"}) {
        o.require(io::read_bytes(tmp.path / "run0" / name) == io::read_bytes(tmp.path / "run1" / name),
                  std::string(name) + " differs");
        ++files;
    }
    if (o.ok) o.detail = std::to_string(dumps[0].size()) + " reports and " + std::to_string(files) + " files identical";
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"prompt parameter count", c01_param_count},
        {"attention and MLP overheads", c02_overheads},
        {"harmonic mean", c03_harmonic_mean},
        {"mean recall", c04_mean_recall},
        {"RS-Flag fixtures", c05_rsflag},
        {"MAD pruning oracle", c06_mad_pruning},
        {"aggregation properties", c07_aggregation},
        {"masked KD", c08_masked_kd},
        {"gradient fidelity", c09_gradients},
        {"FLOPs cross-check", c10_flops},
        {"warm-up schedule", c11_warmup},
        {"B0 vs B7 ablation direction", c12_ablation},
        {"retrieval oracle and frozen gallery", c13_retrieval},
        {"pipeline determinism", c14_determinism},
    };
    // Criteria that cannot pass as written. They still print FAIL; they just do not fail the run.
    const std::map<std::size_t, std::string> known_red{
        {2, "the [0.3525, 0.3531] band excludes the exact ratio (57^2 - 49^2) / 49^2 = 848/2401 "
            "= 0.35319, which criterion 10 pins down exactly"},
    };
    int failed = 0, unexpected = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome out;
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        if (!out.ok) {
            ++failed;
            if (auto it = known_red.find(i + 1); it != known_red.end()) {
                out.detail += " [known: " + it->second + "]";
            } else {
                ++unexpected;
            }
        }
        std::printf("%s  %2zu  %-38s %s\n", out.ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    out.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed, %d unexpected failure(s)\n", criteria.size() - failed,
                criteria.size(), unexpected);
    return unexpected == 0 ? 0 : 1;
}
