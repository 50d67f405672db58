#include <gtest/gtest.h>

#include <cmath>

#include "smi/engine.hpp"
#include "smi/invariants.hpp"
#include "smi/rng.hpp"
#include "smi/serialization.hpp"

using namespace smi;

TEST(Nsvgd, TwoParticleDirectionByHand) {
    Matrix p(2, 1), g(2, 1);
    p << 0.0, 1.0;
    g << 1.0, -2.0;
    const RbfKernel k(1.0);
    const Matrix phi = nsvgd_direction(p, g, k, 1.0);
    const double e = std::exp(-1.0);
    // phi_l = sum_i k_il g_i + (1/2) sum_i -2 (x_i - x_l) k_il
    EXPECT_NEAR(phi(0, 0), 1.0 - 2.0 * e - e, 1e-12);
    EXPECT_NEAR(phi(1, 0), -2.0 + e + e, 1e-12);
}

TEST(Nsvgd, SingleParticleFollowsItsGradient) {
    const auto target = GaussianTarget::standard(3);
    Matrix p(1, 3);
    p << 0.5, -1.0, 2.0;
    ParticleEnsemble ens(p, 1);
    const Matrix g = svgd_grad(target, ens, 0).transpose();
    EXPECT_EQ(g, -p);
    const Matrix phi = nsvgd_direction(p, g, RbfKernel(median_bandwidth(p)), 1.0);
    EXPECT_EQ(phi, -p);
}

TEST(Nsvgd, PermutationEquivariance) {
    SplitMix64 gen(3);
    const Matrix p = uniform_matrix(gen, 5, 2, -2.0, 2.0);
    const Matrix g = uniform_matrix(gen, 5, 2, -1.0, 1.0);
    const RbfKernel k(median_bandwidth(p));
    const Matrix phi = nsvgd_direction(p, g, k, 0.7);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
    perm.indices() << 3, 0, 4, 1, 2;
    const Matrix phi_perm = nsvgd_direction(perm * p, perm * g, k, 0.7);
    EXPECT_TRUE(phi_perm.isApprox(perm * phi, 1e-12));
}

TEST(Nsvgd, RepulsionPushesApart) {
    Matrix p(2, 1), g = Matrix::Zero(2, 1);
    p << -0.1, 0.1;
    const Matrix phi = nsvgd_direction(p, g, RbfKernel(1.0), 1.0);
    EXPECT_LT(phi(0, 0), 0.0);
    EXPECT_GT(phi(1, 0), 0.0);
}

TEST(Engine, CoincidentGuidesStayCoincidentWithoutRepulsion) {
    const auto target = GaussianTarget::standard(2);
    const GaussianGuide guide(2);
    Vector loc(2), scale(2);
    loc << 0.8, -0.4;
    scale << 0.3, 0.6;
    const Vector psi = guide.make_particle(loc, scale);
    ParticleEnsemble ens(psi.transpose().replicate(3, 1), 5);
    EngineConfig ec;
    ec.method = Method::Smi;
    ec.alpha = 0.0;
    ec.n_draws = 4;
    ec.max_steps = 25;
    ec.optimizer = {OptimizerKind::Adam, 0.05};
    run_inference(target, Guide(guide), ec, ens);
    EXPECT_NE(ens.particles.row(0).transpose(), psi);
    for (Index l = 1; l < 3; ++l)
        EXPECT_LT((ens.particles.row(l) - ens.particles.row(0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Engine, MapStepIsGeometricDecayUnderSgd) {
    const auto target = GaussianTarget::standard(1);
    ParticleEnsemble ens(Matrix::Constant(1, 1, 1.0), 0);
    EngineConfig ec;
    ec.method = Method::Map;
    ec.optimizer = {OptimizerKind::Sgd, 0.1};
    ec.max_steps = 20;
    run_inference(target, Guide(PointMassGuide(1)), ec, ens);
    EXPECT_NEAR(ens.particles(0, 0), std::pow(0.9, 20), 1e-14);
    EXPECT_EQ(ens.step, 20);
}

TEST(Engine, AnnealSchedule) {
    const AnnealSchedule s{10, 4, 2.0};
    EXPECT_DOUBLE_EQ(asvgd_anneal(0, s), 0.0);
    EXPECT_DOUBLE_EQ(asvgd_anneal(5, s), 0.25);
    EXPECT_NEAR(asvgd_anneal(12, s), 0.04, 1e-15);
    EXPECT_DOUBLE_EQ(asvgd_anneal(38, s), 0.64);
    EXPECT_DOUBLE_EQ(asvgd_anneal(39, s), 1.0);
    EXPECT_DOUBLE_EQ(asvgd_anneal(500, s), 1.0);
    const AnnealSchedule f = AnnealSchedule::for_steps(60000);
    EXPECT_EQ(f.cycle_length, 15000);
}

TEST(Engine, ConvergenceCriterion) {
    std::vector<double> flat(350, 1.0);
    EXPECT_FALSE(check_convergence(flat));
    std::vector<double> rising(350, 1.0);
    for (std::size_t i = 315; i < 350; ++i) rising[i] = 2.0;
    EXPECT_TRUE(check_convergence(rising));
    std::vector<double> falling(400);
    for (std::size_t i = 0; i < falling.size(); ++i) falling[i] = 1.0 / (1.0 + i);
    EXPECT_FALSE(check_convergence(falling));
    EXPECT_FALSE(check_convergence(std::vector<double>(349, 5.0)));
    EXPECT_TRUE(check_convergence({1.0, 1.0, 3.0}, 3, 1));
}

TEST(Engine, ExactPosteriorGivesExactElbo) {
    Matrix y(5, 1);
    y << 0.2, -0.1, 0.6, 0.3, 0.0;
    const ConjugateGaussianModel model(y, 1.2, 0.8);
    const GaussianGuide guide(1);
    const Vector psi =
        guide.make_particle(model.posterior_mean(), Vector::Constant(1, model.posterior_sd()));
    ParticleEnsemble ens(psi.transpose(), 3);
    EXPECT_NEAR(elbo_estimate(model, guide, ens, 7), model.log_evidence(), 1e-10);
}

TEST(Engine, OviFindsConjugatePosterior) {
    Matrix y(6, 1);
    y << 1.1, 0.4, 0.9, 1.6, 0.7, 1.2;
    const ConjugateGaussianModel model(y, 2.0, 1.0);
    const GaussianGuide guide(1);
    for (auto est : {ForceEstimator::ScoreFunction, ForceEstimator::Pathwise}) {
        ParticleEnsemble ens(guide.make_particle(Vector::Zero(1), Vector::Constant(1, 1.0)).transpose(), 1);
        EngineConfig ec;
        ec.method = Method::Ovi;
        ec.n_draws = 10;
        ec.estimator = est;
        ec.optimizer = {OptimizerKind::Adam, 0.01};
        ec.max_steps = 4000;
        Optimizer opt = make_optimizer(ec, ens);
        run_inference(model, Guide(guide), ec, ens, opt);
        // Small steps, averaged, to smooth out Monte Carlo jitter.
        ec.optimizer.learning_rate = 0.002;
        Optimizer fine = make_optimizer(ec, ens);
        Vector sum = Vector::Zero(2);
        for (int t = 0; t < 6000; ++t) {
            engine_step(model, Guide(guide), ec, ens, fine);
            sum += ens.particles.row(0).transpose();
        }
        const Vector mean = sum / 6000.0;
        EXPECT_NEAR(mean(0), model.posterior_mean()(0), 0.02) << to_string(est);
        EXPECT_NEAR(softplus(mean(1)), model.posterior_sd(), 0.02) << to_string(est);
    }
}

TEST(Engine, EstimatorsAgreeInExpectation) {
    Matrix y(3, 1);
    y << 0.5, -0.2, 0.9;
    const ConjugateGaussianModel model(y, 1.0, 0.6);
    const GaussianGuide guide(1);
    Matrix p(2, 2);
    p.row(0) = guide.make_particle(Vector::Constant(1, -0.3), Vector::Constant(1, 0.5)).transpose();
    p.row(1) = guide.make_particle(Vector::Constant(1, 0.6), Vector::Constant(1, 0.4)).transpose();
    const Index reps = 20000;
    Vector sf = Vector::Zero(2), pw = Vector::Zero(2), sf2 = Vector::Zero(2), pw2 = Vector::Zero(2);
    for (Index r = 0; r < reps; ++r) {
        ParticleEnsemble ens(p, 17);
        ens.step = r;
        const Vector a = smi_attractive_grad(model, Guide(guide), ens, 0, 1);
        const Vector b = smi_attractive_grad(model, Guide(guide), ens, 0, 1, Batch::full(),
                                             ForceEstimator::Pathwise);
        sf += a;
        pw += b;
        sf2 += a.cwiseProduct(a);
        pw2 += b.cwiseProduct(b);
    }
    sf /= reps;
    pw /= reps;
    const Vector se = ((sf2 / reps - sf.cwiseProduct(sf)) / reps +
                       (pw2 / reps - pw.cwiseProduct(pw)) / reps)
                          .cwiseSqrt();
    for (Index j = 0; j < 2; ++j) EXPECT_LT(std::abs(sf(j) - pw(j)), 4.0 * se(j)) << j;
}

TEST(Engine, ReductionsAreBitIdentical) {
    EXPECT_TRUE(compare_smi_point_mass_with_svgd(30, 4, 2).identical);
    EXPECT_TRUE(compare_single_smi_with_ovi(30, 2).identical);
    EXPECT_TRUE(compare_single_smi_with_ovi(30, 2, true).identical);
    EXPECT_TRUE(compare_single_svgd_with_map(30, 2).identical);
}

TEST(Engine, CheckpointResumesBitForBit) {
    const auto target = GaussianTarget::standard(3);
    const GaussianGuide guide(3);
    SplitMix64 gen(4);
    Matrix init(3, 6);
    init.leftCols(3) = uniform_matrix(gen, 3, 3, -1.0, 1.0);
    init.rightCols(3).setConstant(inverse_softplus(0.3));
    EngineConfig ec;
    ec.method = Method::Smi;
    ec.n_draws = 3;
    ec.max_steps = 40;
    ec.optimizer = {OptimizerKind::Adam, 0.02};

    ParticleEnsemble straight(init, 8);
    run_inference(target, Guide(guide), ec, straight);

    ParticleEnsemble first(init, 8);
    EngineConfig half = ec;
    half.max_steps = 17;
    Optimizer opt = make_optimizer(half, first);
    run_inference(target, Guide(guide), half, first, opt);
    const std::string text = make_checkpoint(ec, first, opt).dump();
    Checkpoint cp = restore_checkpoint(Json::parse(text));
    EXPECT_EQ(cp.ensemble.step, 17);
    run_inference(target, Guide(guide), cp.config, cp.ensemble, cp.optimizer);
    EXPECT_EQ(cp.ensemble.particles, straight.particles);
}

TEST(Engine, SerialAndShuffledForceEvaluationAgree) {
    const auto target = GaussianTarget::standard(2);
    const GaussianGuide guide(2);
    Matrix p(3, 4);
    p << 0.1, 0.2, -1.0, -0.5, 1.0, -0.3, -0.2, 0.1, -0.7, 0.4, 0.0, -1.2;
    ParticleEnsemble ens(p, 21);
    ens.step = 9;
    const AttractiveForce force(target, guide, p, 5,
                                AttractiveForce::stream_noise(21, 9, 5, 2), Batch::full(),
                                ForceEstimator::ScoreFunction);
    for (Index l : {2, 0, 1})
        EXPECT_EQ(force.gradient(l), smi_attractive_grad(target, Guide(guide), ens, l, 5));
}

TEST(Engine, RejectsMismatchedSetups) {
    const auto target = GaussianTarget::standard(2);
    ParticleEnsemble ens(Matrix::Zero(2, 2), 0);
    EngineConfig ec;
    ec.method = Method::Map;
    Optimizer opt = make_optimizer(ec, ens);
    EXPECT_THROW(engine_step(target, Guide(GaussianGuide(2)), ec, ens, opt), InvalidInput);
    ec.method = Method::Ovi;
    EXPECT_THROW(engine_step(target, Guide(PointMassGuide(2)), ec, ens, opt), InvalidConfig);
    ec.n_draws = 0;
    EXPECT_THROW(ec.validate(), InvalidConfig);
    EXPECT_THROW(ParticleEnsemble(Matrix(0, 2), 0), InvalidInput);
}

TEST(Engine, NonFiniteGradientIsReported) {
    const GaussianTarget target(Vector::Zero(1), 1e-320);
    ParticleEnsemble ens(Matrix::Constant(1, 1, 1.0), 0);
    EngineConfig ec;
    ec.method = Method::Map;
    ec.optimizer = {OptimizerKind::Sgd, 1.0};
    Optimizer opt = make_optimizer(ec, ens);
    try {
        engine_step(target, Guide(PointMassGuide(1)), ec, ens, opt);
        FAIL() << "expected NumericalFailure";
    } catch (const NumericalFailure& e) {
        EXPECT_EQ(e.particle(), 0);
        EXPECT_EQ(e.point()(0), 1.0);
    }
}

TEST(Optimizer, UpdateRules) {
    Matrix p = Matrix::Zero(1, 2), d(1, 2);
    d << 2.0, -4.0;
    Optimizer sgd({OptimizerKind::Sgd, 0.5}, 1, 2);
    sgd.ascend(p, d);
    EXPECT_EQ(p(0, 0), 1.0);
    EXPECT_EQ(p(0, 1), -2.0);

    p.setZero();
    Optimizer adam({OptimizerKind::Adam, 0.1}, 1, 2);
    adam.ascend(p, d);
    // First Adam step moves each coordinate by lr * sign (up to epsilon).
    EXPECT_NEAR(p(0, 0), 0.1, 1e-8);
    EXPECT_NEAR(p(0, 1), -0.1, 1e-8);

    p.setZero();
    Optimizer ada({OptimizerKind::Adagrad, 0.1}, 1, 2);
    ada.ascend(p, d);
    ada.ascend(p, d);
    EXPECT_NEAR(p(0, 0), 0.1 + 0.1 * 2.0 / std::sqrt(8.0), 1e-9);
    EXPECT_EQ(ada.iterations(), 2);
    EXPECT_THROW(ada.ascend(p, Matrix::Zero(2, 2)), InvalidInput);
}
