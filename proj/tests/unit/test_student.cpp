#include <doctest.h>

#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "protokd/kernels.hpp"
#include "protokd/student.hpp"

using namespace protokd;
using namespace protokd::student;

namespace {

Matrix random_tokens(std::mt19937_64& rng, int n, int d, double scale = 1.0) {
    std::normal_distribution<double> g(0, scale);
    Matrix m(n, d);
    for (double& x : m.data) x = g(rng);
    return m;
}

ToyEncoderConfig small(int d, int n, int p, int l, std::uint64_t seed) {
    ToyEncoderConfig c;
    c.dim = d;
    c.seq_len = n;
    c.prompt_tokens = p;
    c.layers = l;
    c.seed = seed;
    return c;
}

// Three classes whose image tokens scatter around class-specific token patterns.
TrainingSet separable_set(std::mt19937_64& rng, int d, int n, int per_class) {
    TrainingSet ts;
    std::vector<Matrix> centers;
    for (int k = 0; k < 3; ++k) centers.push_back(random_tokens(rng, n, d));
    std::normal_distribution<double> g(0, 0.3);
    for (int k = 0; k < 3; ++k) {
        for (int i = 0; i < per_class; ++i) {
            Matrix m = centers[k];
            for (double& x : m.data) x += g(rng);
            ts.image_tokens.push_back(m);
            ts.labels.push_back(k);
        }
        ts.classes.push_back(k);
        ts.class_tokens.push_back(random_tokens(rng, n, d));
    }
    return ts;
}

double train_accuracy(const ToyStudent& s, const TrainingSet& ts) {
    const auto img = student_image_embeddings(s, ts.image_tokens);
    const auto txt = student_text_embeddings(s, ts.class_tokens);
    int ok = 0;
    for (std::size_t i = 0; i < img.size(); ++i) {
        int best = 0;
        for (std::size_t k = 1; k < txt.size(); ++k)
            if (dot(img[i], txt[k]) > dot(img[i], txt[best])) best = static_cast<int>(k);
        ok += best == ts.labels[i];
    }
    return static_cast<double>(ok) / static_cast<double>(img.size());
}

distill::DistillConfig task_only() {
    distill::DistillConfig c;
    c.lambda_img = c.lambda_text = c.lambda_logit = 0;
    return c;
}

}  // namespace

TEST_SUITE("student") {

TEST_CASE("init is deterministic per seed") {
    const auto a = init_encoder(small(8, 4, 2, 2, 5));
    const auto b = init_encoder(small(8, 4, 2, 2, 5));
    const auto c = init_encoder(small(8, 4, 2, 2, 6));
    CHECK(a.frozen == b.frozen);
    CHECK(a.prompts == b.prompts);
    CHECK_FALSE(a.frozen == c.frozen);
    REQUIRE(a.prompts.size() == 2);
    CHECK(a.prompts[0].rows == 2);
}

TEST_CASE("prompt depth and P = 0") {
    auto cfg = small(8, 4, 2, 2, 1);
    cfg.prompt_depth = 1;
    CHECK(init_encoder(cfg).prompts.size() == 1);
    const auto none = init_encoder(small(8, 4, 0, 2, 1));
    CHECK(none.prompts.empty());
    std::mt19937_64 rng(1);
    const Matrix x = random_tokens(rng, 4, 8);
    const auto t = encode_traced(none, x);
    CHECK(encode_backward(none, t, t.output).empty());
    // Same frozen weights with prompts attached differ only through the prompt path.
    CHECK(encode(none, x) == encode(init_encoder(small(8, 4, 0, 2, 1)), x));
}

TEST_CASE("encode output is unit and deterministic") {
    std::mt19937_64 rng(3);
    const auto enc = init_encoder(small(12, 5, 3, 2, 9));
    for (int t = 0; t < 20; ++t) {
        const Matrix x = random_tokens(rng, 5, 12);
        const Vec a = encode(enc, x);
        CHECK(is_unit(a, 1e-9));
        CHECK(encode(enc, x) == a);
    }
    CHECK_THROWS_AS(encode(enc, Matrix(4, 12)), ValidationError);
}

TEST_CASE("a small prompt perturbation moves the output") {
    std::mt19937_64 rng(4);
    auto enc = init_encoder(small(8, 4, 2, 1, 2));
    const Matrix x = random_tokens(rng, 4, 8);
    const Vec a = encode(enc, x);
    enc.prompts[0](1, 3) += 1e-3;
    const Vec b = encode(enc, x);
    double diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += std::abs(a[i] - b[i]);
    CHECK(diff > 1e-8);
}

TEST_CASE("backward matches finite differences on the reference instance") {
    std::mt19937_64 rng(17);
    auto s = init_student(small(8, 4, 2, 1, 3), small(8, 4, 2, 1, 4), 1.3);
    for (auto* enc : {&s.vision, &s.text})
        for (auto& p : enc->prompts)
            for (double& x : p.data) x *= 20;  // move away from the tiny init
    TrainingSet ts;
    for (int i = 0; i < 4; ++i) {
        ts.image_tokens.push_back(random_tokens(rng, 4, 8));
        ts.teacher_image.push_back(oracle::random_unit(rng, 8));
        ts.labels.push_back(i % 3);
    }
    for (int k = 0; k < 3; ++k) {
        ts.classes.push_back(k);
        ts.class_tokens.push_back(random_tokens(rng, 4, 8));
        if (k < 2) ts.prototypes[k] = oracle::random_unit(rng, 8);
    }
    distill::DistillConfig cfg;
    cfg.tau_t = 4;
    cfg.warmup_fraction = 0;
    const std::vector<std::size_t> batch{0, 1, 2, 3};
    const auto res = backward(s, ts, batch, cfg, 0, 1, ExecPolicy::Serial);
    const double h = 1e-5;
    const auto f = [&] { return evaluate_loss(s, ts, batch, cfg, 0, 1).total; };
    const auto probe = [&](double& slot, double analytic) {
        const double keep = slot;
        slot = keep + h;
        const double up = f();
        slot = keep - h;
        const double dn = f();
        slot = keep;
        const double fd = (up - dn) / (2 * h);
        CHECK(std::abs(analytic - fd) <= 1e-7 + 1e-4 * std::abs(fd));
    };
    for (std::size_t l = 0; l < s.vision.prompts.size(); ++l)
        for (std::size_t i = 0; i < s.vision.prompts[l].data.size(); ++i)
            probe(s.vision.prompts[l].data[i], res.grads.vision_prompts[l].data[i]);
    for (std::size_t l = 0; l < s.text.prompts.size(); ++l)
        for (std::size_t i = 0; i < s.text.prompts[l].data.size(); ++i)
            probe(s.text.prompts[l].data[i], res.grads.text_prompts[l].data[i]);
    probe(s.tau_s, res.grads.tau_s);

    const auto par = backward(s, ts, batch, cfg, 0, 1, ExecPolicy::Parallel);
    CHECK(par.grads.vision_prompts == res.grads.vision_prompts);
    CHECK(par.grads.tau_s == res.grads.tau_s);
}

TEST_CASE("task-only optimum has near-zero gradients") {
    std::mt19937_64 rng(6);
    auto s = init_student(small(6, 3, 1, 1, 1), small(6, 3, 1, 1, 1), 200.0);
    TrainingSet ts;
    ts.classes = {0, 1};
    ts.class_tokens = {random_tokens(rng, 3, 6), random_tokens(rng, 3, 6)};
    // Use each class's own text input as an image so the margin is the full cosine gap.
    ts.image_tokens = ts.class_tokens;
    ts.labels = {0, 1};
    const auto txt = student_text_embeddings(s, ts.class_tokens);
    REQUIRE(dot(txt[0], txt[1]) < 0.9);
    const std::vector<std::size_t> batch{0, 1};
    const auto r = backward(s, ts, batch, task_only(), 0, 1);
    CHECK(r.loss.task < 1e-6);
    for (const auto& m : r.grads.vision_prompts)
        for (double g : m.data) CHECK(std::abs(g) < 1e-4);
}

TEST_CASE("lr = 0 and zero epochs leave parameters alone") {
    std::mt19937_64 rng(8);
    auto s = init_student(small(8, 4, 2, 1, 1), small(8, 4, 2, 1, 1));
    const TrainingSet ts = separable_set(rng, 8, 4, 3);
    const ToyStudent before = s;
    TrainOptions o;
    o.epochs = 5;
    o.learning_rate = 0;
    const auto st = train(s, ts, task_only(), o);
    CHECK(st.loss_history.size() == 5);
    CHECK(s.vision.prompts == before.vision.prompts);
    CHECK(s.tau_s == before.tau_s);
    for (const auto& l : st.loss_history) CHECK(l.total == st.loss_history.front().total);
    o.epochs = 0;
    o.learning_rate = 0.1;
    const auto z = train(s, ts, task_only(), o);
    CHECK(z.loss_history.empty());
    CHECK(z.step == 0);
    CHECK(s.text.prompts == before.text.prompts);
}

TEST_CASE("training improves separable 3-class tasks and never touches frozen weights") {
    // tau_s is held fixed so that any gain has to come through the prompts.
    int improved = 0;
    for (int seed = 0; seed < 6; ++seed) {
        std::mt19937_64 rng(100 + seed);
        const TrainingSet ts = separable_set(rng, 8, 4, 6);
        auto s = init_student(small(8, 4, 4, 2, 21 + seed), small(8, 4, 4, 2, 21 + seed));
        const auto frozen_v = s.vision.frozen, frozen_t = s.text.frozen;
        const double acc0 = train_accuracy(s, ts);
        TrainOptions o;
        o.epochs = 200;
        o.learning_rate = 0.05;
        o.scale_learning_rate = 0.0;
        const auto st = train(s, ts, task_only(), o);
        CHECK(st.step == 200);
        CHECK(st.loss_history.size() == 200);
        CHECK(st.loss_history.back().task < st.loss_history.front().task);
        const double acc1 = train_accuracy(s, ts);
        CHECK(acc1 >= acc0);
        improved += acc1 > acc0;
        CHECK(s.vision.frozen == frozen_v);
        CHECK(s.text.frozen == frozen_t);
    }
    CHECK(improved >= 3);
}

TEST_CASE("training is deterministic") {
    std::mt19937_64 r1(30), r2(30);
    const TrainingSet a = separable_set(r1, 8, 4, 3), b = separable_set(r2, 8, 4, 3);
    auto s1 = init_student(small(8, 4, 2, 2, 2), small(8, 4, 2, 2, 2));
    auto s2 = s1;
    TrainOptions o;
    o.epochs = 10;
    o.batch_size = 4;
    o.seed = 99;
    o.learning_rate = 0.2;
    train(s1, a, task_only(), o);
    train(s2, b, task_only(), o);
    CHECK(s1.vision.prompts == s2.vision.prompts);
    CHECK(s1.text.prompts == s2.text.prompts);
    CHECK(s1.tau_s == s2.tau_s);
}

TEST_CASE("text prompts only affect text embeddings") {
    std::mt19937_64 rng(5);
    auto s = init_student(small(8, 4, 2, 1, 1), small(8, 4, 2, 1, 2));
    const std::vector<Matrix> img{random_tokens(rng, 4, 8)}, txt{random_tokens(rng, 4, 8)};
    const auto v0 = student_image_embeddings(s, img);
    const auto t0 = student_text_embeddings(s, txt);
    s.text.prompts[0](0, 0) += 0.5;
    CHECK(student_image_embeddings(s, img) == v0);
    CHECK_FALSE(student_text_embeddings(s, txt) == t0);
    CHECK(student_text_embeddings(s, {txt[0], txt[0]})[0] == student_text_embeddings(s, {txt[0], txt[0]})[1]);
}

TEST_CASE("op counter tracks the closed-form overhead") {
    for (int n : {4, 7, 49}) {
        for (int p : {0, 1, 3, 8}) {
            const auto c0 = count_multiply_adds(small(2, n, 0, 1, 1));
            const auto cp = count_multiply_adds(small(2, n, p, 1, 1));
            const std::uint64_t t0 = n, tp = n + p;
            CHECK(c0.attention == 2 * t0 * t0 * 2);
            CHECK(cp.attention == 2 * tp * tp * 2);
            CHECK((cp.mlp - c0.mlp) * t0 == c0.mlp * static_cast<std::uint64_t>(p));
        }
    }
}

TEST_CASE("serial and parallel kernels agree bitwise") {
    std::mt19937_64 rng(10);
    const auto enc = init_encoder(small(16, 6, 4, 2, 3));
    std::vector<Matrix> xs;
    for (int i = 0; i < 9; ++i) xs.push_back(random_tokens(rng, 6, 16));
    std::vector<const Matrix*> ptrs;
    for (const auto& x : xs) ptrs.push_back(&x);
    const auto a = kernels::encode_batch_serial(enc, ptrs);
    const auto b = kernels::encode_batch_omp(enc, ptrs);
    std::vector<Vec> d_outs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].output == b[i].output);
        d_outs.push_back(oracle::random_unit(rng, 16));
    }
    CHECK(kernels::backward_batch_serial(enc, a, d_outs) == kernels::backward_batch_omp(enc, b, d_outs));
    std::vector<Vec> q, g;
    for (int i = 0; i < 7; ++i) q.push_back(oracle::random_unit(rng, 5));
    for (int i = 0; i < 11; ++i) g.push_back(oracle::random_unit(rng, 5));
    CHECK(kernels::similarity_serial(q, g) == kernels::similarity_omp(q, g));
}

TEST_CASE("config validation") {
    auto c = small(8, 4, 2, 1, 1);
    c.dim = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = small(8, 4, -1, 1, 1);
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = small(8, 4, 2, 2, 1);
    c.prompt_depth = 3;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    CHECK_THROWS_AS(init_student(small(8, 4, 2, 1, 1), small(8, 4, 2, 1, 1), 0.0), ValidationError);
}

}
