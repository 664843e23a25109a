#include <gtest/gtest.h>

#include <sstream>

#include "koopman/io.hpp"

using namespace koopman;

TEST(TrajectoryCsv, RoundTripIsExact) {
    const auto t = simulate(duffing_field(), Eigen::Vector2d(0.3, 1.7), 0.2, 20);
    std::stringstream ss;
    write_trajectory_csv(ss, t);
    EXPECT_EQ(ss.str().substr(0, 8), "t,x1,x2\n");
    const auto back = read_trajectories_csv(ss);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].states, t.states);
    EXPECT_NEAR(back[0].dt, 0.2, 1e-15);
}

TEST(TrajectoryCsv, MultipleTrajectories) {
    const auto set = generate_duffing_training_set();
    const std::vector<Trajectory> three(set.begin(), set.begin() + 3);
    std::stringstream ss;
    write_trajectories_csv(ss, three);
    const auto back = read_trajectories_csv(ss);
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(back[i].states, three[i].states);
}

TEST(TrajectoryCsv, Errors) {
    std::stringstream empty;
    EXPECT_THROW(read_trajectories_csv(empty), FormatError);
    std::stringstream bad_header("a,b,c\n0,1,2\n");
    EXPECT_THROW(read_trajectories_csv(bad_header), FormatError);
    std::stringstream ragged("t,x1,x2\n0,1,2\n0.1,1\n");
    EXPECT_THROW(read_trajectories_csv(ragged), FormatError);
    std::stringstream junk("t,x1\n0,1\n0.1,abc\n");
    EXPECT_THROW(read_trajectories_csv(junk), FormatError);
    std::stringstream uneven("t,x1\n0,1\n0.1,1\n0.3,1\n");
    EXPECT_THROW(read_trajectories_csv(uneven), FormatError);
}

TEST(ParseState, Values) {
    EXPECT_EQ(parse_state("1.5,-2"), StateVector(Eigen::Vector2d(1.5, -2)));
    EXPECT_EQ(parse_state(" 1, 0 ,0"), StateVector(Eigen::Vector3d(1, 0, 0)));
    EXPECT_THROW(parse_state("1,x"), FormatError);
    EXPECT_THROW(parse_state(""), FormatError);
}

TEST(DictionaryJson, SpecRoundTrip) {
    for (const auto& text : {R"({"kind":"rbf","n_centers":10})", R"({"kind":"polynomial","max_order":4})",
                             R"({"kind":"fourier","n_pairs":3,"L":2.5})"}) {
        const auto spec = dictionary_spec_from_json(json::parse(text));
        const auto again = dictionary_spec_from_json(dictionary_spec_to_json(spec));
        EXPECT_EQ(again.kind, spec.kind);
        EXPECT_EQ(again.hyperparameter(), spec.hyperparameter());
        EXPECT_EQ(again.box_half_width, spec.box_half_width);
    }
    EXPECT_THROW(dictionary_spec_from_json(json::parse(R"({"kind":"rbf"})")), FormatError);
    EXPECT_THROW(dictionary_spec_from_json(json::parse(R"({"kind":"rbf","n_centers":10,"centres":1})")), FormatError);
    EXPECT_THROW(dictionary_spec_from_json(json::parse(R"({"kind":"spline"})")), InvalidArgument);
}

TEST(DictionaryJson, ResolvedRbfKeepsCentersAndWidth) {
    const auto data = uniform_box_samples(1, 100, 2, -2, 2);
    const auto d = build_dictionary(DictionarySpec::with_hyperparameter(DictionaryKind::rbf, 7), 2, data);
    const auto back = dictionary_from_json(dictionary_to_json(d), 2);
    EXPECT_EQ(back.centers(), d.centers());
    EXPECT_EQ(back.width(), d.width());
    const Eigen::Vector2d x(0.3, -0.4);
    EXPECT_EQ(back.evaluate(x), d.evaluate(x));
}

TEST(ModelJson, RoundTripPredictsIdentically) {
    const auto training = generate_duffing_training_set();
    for (const auto& spec : {DictionarySpec::with_hyperparameter(DictionaryKind::rbf, 25),
                             DictionarySpec::with_hyperparameter(DictionaryKind::fourier, 2),
                             DictionarySpec::with_hyperparameter(DictionaryKind::polynomial, 3)}) {
        const auto model = fit_on(training, spec, 1e-10);
        const auto j = model_to_json(model, ModelFileInfo{42, training.size()});
        const auto back = model_from_json(json::parse(j.dump()));
        EXPECT_EQ(back.K(), model.K());
        EXPECT_EQ(back.C(), model.C());
        EXPECT_EQ(back.metadata().n_pairs, model.metadata().n_pairs);
        EXPECT_EQ(back.fit_residual(), model.fit_residual());
        const Eigen::Vector2d x0(-0.9, 1.4);
        EXPECT_EQ(predict(back, x0, 30), predict(model, x0, 30));
        EXPECT_EQ(j.at("metadata").at("seed"), 42);
        EXPECT_EQ(j.at("eigenvalues").size(), static_cast<std::size_t>(model.K().rows()));
    }
}

TEST(ModelJson, RejectsForeignOrInconsistentFiles) {
    EXPECT_THROW(model_from_json(json::parse(R"({"format":"other"})")), FormatError);
    const auto model = fit_on(generate_duffing_training_set(), DictionarySpec::with_hyperparameter(DictionaryKind::polynomial, 2), 1e-10);
    auto j = model_to_json(model);
    j["K"] = json::array({json::array({1.0})});
    EXPECT_THROW(model_from_json(j), FormatError);
}

TEST(ActionsJson, ListAndSingle) {
    const auto list = actions_from_json(json::parse(R"({"actions": [[[1,0],[0,1]], [[-1,0],[0,-1]]]})"));
    ASSERT_EQ(list.size(), 2u);
    EXPECT_TRUE(list[0].is_identity());
    EXPECT_EQ(list[1].scalar(), -1.0);
    const auto single = actions_from_json(json::parse(R"({"action": [[-1,0,0],[0,-1,0],[0,0,1]]})"));
    ASSERT_EQ(single.size(), 1u);
    EXPECT_EQ(single[0].matrix(), lorenz_action().matrix());
    const auto again = actions_from_json(actions_to_json(list));
    EXPECT_EQ(again[1].matrix(), list[1].matrix());
}

TEST(ActionsJson, Errors) {
    EXPECT_THROW(actions_from_json(json::parse(R"({})")), FormatError);
    EXPECT_THROW(actions_from_json(json::parse(R"({"action": [[1,0],[0]]})")), FormatError);
    EXPECT_THROW(actions_from_json(json::parse(R"({"action": [[0,0],[0,0]]})")), FormatError);
}

TEST(ConfigJson, DefaultsWhenEmpty) {
    const auto cfg = config_from_json(json::object());
    const ExperimentConfig def;
    EXPECT_EQ(cfg.seed, def.seed);
    EXPECT_EQ(cfg.sweep.size(), 3u);
    EXPECT_EQ(cfg.test.count, 100);
}

TEST(ConfigJson, OverridesFields) {
    const auto cfg = config_from_json(json::parse(R"({
        "system": "lorenz", "seed": 7,
        "sweep": [{"kind": "fourier", "values": [2, 4]}],
        "test": {"count": 12, "domain": [-1, 1], "horizon": 20},
        "knn_k": 3,
        "lorenz": {"dictionary": {"kind": "rbf", "n_centers": 40}, "sweep_centers": [40], "horizon": 30}
    })"));
    EXPECT_EQ(cfg.system, "lorenz");
    EXPECT_EQ(cfg.seed, 7u);
    ASSERT_EQ(cfg.sweep.size(), 1u);
    EXPECT_EQ(cfg.sweep[0].kind, DictionaryKind::fourier);
    EXPECT_EQ(cfg.sweep[0].values, (std::vector<int>{2, 4}));
    EXPECT_EQ(cfg.test.count, 12);
    EXPECT_EQ(cfg.test.domain_min, -1.0);
    EXPECT_EQ(cfg.test.horizon, 20);
    EXPECT_EQ(cfg.knn_k, 3);
    EXPECT_EQ(cfg.lorenz.dictionary.n_centers, 40);
    EXPECT_EQ(cfg.lorenz.horizon, 30);
}

TEST(ConfigJson, Errors) {
    EXPECT_THROW(config_from_json(json::parse(R"({"sede": 1})")), FormatError);
    EXPECT_THROW(config_from_json(json::parse(R"({"system": "pendulum"})")), FormatError);
    EXPECT_THROW(config_from_json(json::parse(R"({"knn_k": 4})")), FormatError);
    EXPECT_THROW(config_from_json(json::parse(R"({"seed": "abc"})")), FormatError);
    EXPECT_THROW(config_from_json(json::parse(R"({"test": {"domain": [2, -2]}})")), FormatError);
    EXPECT_THROW(config_from_json(json::parse(R"({"sweep": [{"kind": "rbf", "values": []}]})")), FormatError);
    EXPECT_THROW(config_from_json(json::parse(R"([1, 2])")), FormatError);
}
