#include <filesystem>

#include <gtest/gtest.h>

#include "toolskill/experiment.hpp"
#include "toolskill/io.hpp"
#include "toolskill/primitive.hpp"

using namespace toolskill;

TEST(Hash, KnownSha256Vectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Files, WriteReadAndMissing) {
    const auto dir = std::filesystem::temp_directory_path() / "toolskill_test_io";
    std::filesystem::remove_all(dir);
    write_file(dir / "a" / "b.txt", "hello\n");
    EXPECT_EQ(read_file(dir / "a" / "b.txt"), "hello\n");
    EXPECT_EQ(file_sha256(dir / "a" / "b.txt"), sha256_hex("hello\n"));
    EXPECT_THROW(read_file(dir / "nope.txt"), MissingInputError);
    std::filesystem::remove_all(dir);
}

TEST(Dataset, JsonlRoundTripIsByteIdentical) {
    CollectConfig c;
    c.inclined_count = 1;
    c.step_count = 1;
    c.episode.duration = 2.0;
    const Dataset d = collect_primitive_dataset(c);
    const std::string text = dataset_to_jsonl(d);
    const Dataset back = dataset_from_jsonl(text);
    ASSERT_EQ(back.trajectories.size(), 2u);
    EXPECT_EQ(back.trajectories[1].meta.env.kind, SurfaceKind::Step);
    EXPECT_EQ(back.trajectories[0].frames[17].sensors.tactile_raw, d.trajectories[0].frames[17].sensors.tactile_raw);
    EXPECT_EQ(dataset_to_jsonl(back), text);
}

TEST(Dataset, MalformedInputsAreRejected) {
    EXPECT_THROW(dataset_from_jsonl(""), InputError);
    EXPECT_THROW(dataset_from_jsonl("{\"kind\":\"mystery\"}\n"), InputError);
    CollectConfig c;
    c.inclined_count = 1;
    c.step_count = 1;
    c.episode.duration = 1.0;
    std::string text = dataset_to_jsonl(collect_primitive_dataset(c));
    // Drop the last trajectory block: the header count no longer matches.
    const std::string tag = "\"kind\":\"trajectory\"";
    const auto second = text.find(tag, text.find(tag) + 1);
    ASSERT_NE(second, std::string::npos);
    text = text.substr(0, text.rfind('\n', second) + 1);
    EXPECT_THROW(dataset_from_jsonl(text), InputError);
}

TEST(Params, RoundTripExact) {
    Seq2SeqDims d;
    d.hidden = 7;
    const auto p = init_params(d, 4);
    const std::string text = params_to_string(p, "abc", {{"role", "test"}});
    const auto back = params_from_json(json::parse(text));
    EXPECT_EQ(back.stats_sha256, "abc");
    EXPECT_EQ(back.meta["role"], "test");
    EXPECT_EQ(back.params.encoder.recurrent_weights, p.encoder.recurrent_weights);
    EXPECT_EQ(back.params.decoder_head.bias, p.decoder_head.bias);
    EXPECT_EQ(params_to_string(back.params, "abc", {{"role", "test"}}), text);
}

TEST(Params, ShapeMismatchAndNonFinite) {
    Seq2SeqDims d;
    d.hidden = 5;
    json j = params_to_json(init_params(d, 1), "x");
    json wrong = j;
    wrong["dims"]["hidden"] = 6;
    EXPECT_THROW(params_from_json(wrong), InputError);
    json other = j;
    other["format"] = "something";
    EXPECT_THROW(params_from_json(other), InputError);
    json nan = j;
    nan["groups"]["decoder_head"]["bias"]["data"][0] = nullptr;
    EXPECT_THROW(params_from_json(nan), InputError);
}

TEST(Stats, RoundTripAndChannelChecks) {
    NormalizationStats s;
    s.min = Vec::LinSpaced(kNormChannels, -3.0, 0.0);
    s.max = Vec::LinSpaced(kNormChannels, 1.0, 4.0);
    const auto back = stats_from_json(json::parse(stats_to_string(s)));
    EXPECT_EQ(back.min, s.min);
    EXPECT_EQ(back.max, s.max);
    json j = stats_to_json(s);
    j["channels"].erase(0);
    EXPECT_THROW(stats_from_json(j), InputError);
    j = stats_to_json(s);
    j["channels"][2]["max"] = -10.0;
    EXPECT_THROW(stats_from_json(j), InputError);
}

TEST(Config, UnknownKeysAreRejected) {
    EXPECT_THROW(environment_from_json(json{{"inclinaton", 0.1}}), ConfigError);
    EXPECT_THROW(experiment_from_json(json{{"sead", 1}}), ConfigError);
    EXPECT_THROW(experiment_from_json(json{{"eval", {{"seed", {0}}}}}), ConfigError);
    EXPECT_THROW(parse_json("{", "cfg"), ConfigError);
}

TEST(Config, ValidationErrors) {
    EXPECT_THROW(experiment_from_json(json{{"pretrain", {{"mask", "decoder_head"}}}}), ConfigError);
    EXPECT_THROW(experiment_from_json(json{{"pretrain", {{"lr", -1.0}}}}), ConfigError);
    EXPECT_THROW(experiment_from_json(json{{"eval", {{"seeds", json::array()}}}}), ConfigError);
    EXPECT_THROW(experiment_from_json(json{{"observation_mask", "sonar"}}), ConfigError);
    EXPECT_THROW(experiment_from_json(json{{"episode", {{"duration", 1.03}}}}), ConfigError);
    const json dup = {{"tasks", {{{"name", "a"}}, {{"name", "a"}}}}};
    EXPECT_THROW(experiment_from_json(dup), ConfigError);
    EXPECT_THROW(experiment_from_json(json{{"tasks", {{{"name", "a b"}}}}}), ConfigError);
    EXPECT_THROW(experiment_from_json(json{{"finetune", {{"mask", "decoder+bogus"}}}}), ConfigError);
}

TEST(Config, CanonicalRoundTripAndHash) {
    json j = {{"seed", 4},
              {"tasks", {{{"name", "force"}, {"inclination_range", {-0.1, 0.1}}, {"oracle", {{"target_force", 0.5}}}}}},
              {"finetune", {{"mask", "decoder+decoder_head"}}}};
    const auto c = experiment_from_json(j);
    EXPECT_EQ(c.task("force").oracle.target_force, 0.5);
    EXPECT_TRUE(c.finetune.mask[ParamGroup::Decoder]);
    EXPECT_FALSE(c.finetune.mask[ParamGroup::Encoder]);
    const auto again = experiment_from_json(to_json(c));
    EXPECT_EQ(to_json(again).dump(), to_json(c).dump());
    EXPECT_EQ(config_hash(again), config_hash(c));

    auto moved = c;
    moved.output_dir = "elsewhere";
    EXPECT_EQ(config_hash(moved), config_hash(c));
    auto changed = c;
    changed.seed = 5;
    EXPECT_NE(config_hash(changed), config_hash(c));
    EXPECT_THROW(c.task("stairs"), ConfigError);
}

TEST(Config, TaskEnvironmentsAreSeededPerStream) {
    const auto c = experiment_from_json(json{{"tasks", {{{"name", "force"}, {"inclination_range", {-0.15, 0.15}}}}}});
    const auto& t = c.task("force");
    const double a = task_environment(c, t, TaskStream::Demo, 0).inclination;
    EXPECT_EQ(a, task_environment(c, t, TaskStream::Demo, 0).inclination);
    EXPECT_NE(a, task_environment(c, t, TaskStream::Eval, 0).inclination);
    EXPECT_NE(a, task_environment(c, t, TaskStream::Demo, 1).inclination);
    for (std::uint64_t i = 0; i < 50; ++i) {
        const double psi = task_environment(c, t, TaskStream::Eval, i).inclination;
        EXPECT_GE(psi, -0.15);
        EXPECT_LE(psi, 0.15);
    }
}
