#include <doctest.h>

#include <fstream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "impress/simgen.hpp"
#include "support/temp_dir.hpp"
#include "support/toy_world.hpp"

using namespace impress;
using toy::TempDir;

namespace {

struct SimRig {
    std::shared_ptr<ScriptedChatBackend> chat = std::make_shared<ScriptedChatBackend>();
    std::shared_ptr<HashEmbedBackend> embed = std::make_shared<HashEmbedBackend>(8);
    std::shared_ptr<Gateway> gateway;

    SimRig() {
        RetryPolicy no_wait;
        no_wait.base_delay_ms = 0;
        gateway = std::make_shared<Gateway>(chat, embed, no_wait);
    }
};

ModelConfig user_config() {
    ModelConfig config = toy::chat_config();
    config.model_id = "sim-user-model";
    return config;
}

ModelConfig assistant_config() {
    ModelConfig config = toy::chat_config();
    config.model_id = "sim-assistant-model";
    return config;
}

ScenarioSpec make_scenario(std::string root_cause,
                           std::set<std::string> gold = {"disk-cleaner"}) {
    ScenarioSpec scenario;
    scenario.problem_essence = "computer keeps filling up";
    scenario.root_cause = std::move(root_cause);
    scenario.gold_spcs = std::move(gold);
    scenario.domain_tag = "storage";
    return scenario;
}

PersonaDistributions fixed_personas() {
    PersonaDistributions dists;
    dists.age.range = {30, 30};
    dists.gender.categories = {"nonbinary"};
    dists.occupation.categories = {"nurse"};
    return dists;
}

void check_alternating_user_first(const Conversation& conv) {
    REQUIRE_FALSE(conv.utterances.empty());
    for (std::size_t i = 0; i < conv.utterances.size(); ++i)
        CHECK(conv.utterances[i].role == (i % 2 == 0 ? Role::User : Role::Assistant));
}

}  // namespace

TEST_CASE("attribute distributions validate their shape") {
    AttributeDistribution d;
    CHECK_THROWS_AS(d.validate("age"), BadDistribution);  // nothing set

    d.range = {5, 3};
    CHECK_THROWS_AS(d.validate("age"), BadDistribution);
    d.range = {3, 5};
    CHECK_NOTHROW(d.validate("age"));

    d.categories = {"x"};
    CHECK_THROWS_AS(d.validate("age"), BadDistribution);  // range and categories

    d.range.reset();
    CHECK_NOTHROW(d.validate("age"));
    d.weights = {1.0, 2.0};
    CHECK_THROWS_AS(d.validate("age"), BadDistribution);  // size mismatch
    d.categories = {"x", "y"};
    CHECK_NOTHROW(d.validate("age"));
    d.weights = {1.0, 0.0};
    CHECK_THROWS_AS(d.validate("age"), BadDistribution);  // non-positive weight
}

TEST_CASE("attribute distributions parse from JSON") {
    auto ranged = attribute_distribution_from_json("age", {{"range", {18, 65}}});
    REQUIRE(ranged.range.has_value());
    CHECK(ranged.range->first == 18);
    CHECK(ranged.range->second == 65);

    auto weighted = attribute_distribution_from_json(
        "gender", {{"categories", {"woman", "man"}}, {"weights", {2.0, 1.0}}});
    CHECK(weighted.categories == std::vector<std::string>{"woman", "man"});
    CHECK(weighted.weights == std::vector<double>{2.0, 1.0});

    CHECK_THROWS_AS(attribute_distribution_from_json("age", nlohmann::json::array()),
                    BadDistribution);
    CHECK_THROWS_AS(attribute_distribution_from_json("age", {{"range", {1}}}), BadDistribution);
    CHECK_THROWS_AS(attribute_distribution_from_json("age", {{"range", {1.5, 2.0}}}),
                    BadDistribution);
    CHECK_THROWS_AS(attribute_distribution_from_json("g", {{"categories", {1, 2}}}),
                    BadDistribution);
    CHECK_THROWS_AS(
        attribute_distribution_from_json("g", {{"categories", {"a"}}, {"weights", {"x"}}}),
        BadDistribution);

    nlohmann::json all = {{"age", {{"range", {20, 30}}}},
                          {"gender", {{"categories", {"woman"}}}},
                          {"occupation", {{"categories", {"chef"}}}}};
    CHECK_NOTHROW(persona_distributions_from_json(all));
    all.erase("occupation");
    CHECK_THROWS_AS(persona_distributions_from_json(all), BadDistribution);
}

TEST_CASE("persona sampling is seeded") {
    PersonaDistributions fixed = fixed_personas();
    for (std::uint64_t seed : {0ull, 17ull, 999ull}) {
        Persona p = sample_persona(fixed, seed);
        CHECK(p == Persona{30, "nonbinary", "nurse"});
    }

    PersonaDistributions varied;
    varied.age.range = {18, 80};
    varied.gender.categories = {"woman", "man", "nonbinary"};
    varied.occupation.categories = {"chef", "teacher", "welder", "nurse"};
    CHECK(sample_persona(varied, 7) == sample_persona(varied, 7));

    PersonaDistributions text_age = varied;
    text_age.age = {};
    text_age.age.categories = {"42"};
    CHECK(sample_persona(text_age, 1).age == 42);
    text_age.age.categories = {"forty"};
    CHECK_THROWS_AS(sample_persona(text_age, 1), BadDistribution);
}

TEST_CASE("sampling frequencies track the weights") {
    AttributeDistribution uniform;
    uniform.categories = {"a", "b"};
    Rng rng(42);
    int a_count = 0;
    for (int i = 0; i < 10000; ++i)
        if (uniform.sample(rng) == "a") ++a_count;
    CHECK(a_count > 4700);
    CHECK(a_count < 5300);

    PersonaDistributions dists = fixed_personas();
    dists.gender = {};
    dists.gender.categories = {"cat", "dog"};
    dists.gender.weights = {1.0, 3.0};
    int dog_count = 0;
    for (int i = 0; i < 4000; ++i)
        if (sample_persona(dists, mix_seed(9000, static_cast<std::uint64_t>(i))).gender == "dog")
            ++dog_count;
    CHECK(dog_count > 4000 * 0.70);
    CHECK(dog_count < 4000 * 0.80);
}

TEST_CASE("scenario and persona files load and validate") {
    TempDir dir("simgen-files");

    auto scenario_path = dir.path / "scenarios.json";
    std::ofstream(scenario_path) << nlohmann::json::array(
        {{{"problem_essence", "laptop is slow"},
          {"root_cause", "startup bloat"},
          {"gold_spcs", {"disk-cleaner"}},
          {"domain_tag", "performance"}}});
    auto scenarios = load_scenarios(scenario_path);
    REQUIRE(scenarios.size() == 1);
    CHECK(scenarios[0].problem_essence == "laptop is slow");
    CHECK(scenarios[0].gold_spcs == std::set<std::string>{"disk-cleaner"});
    CHECK(scenarios[0].domain_tag == "performance");

    std::ofstream(scenario_path) << "{\"not\": \"a list\"}";
    CHECK_THROWS_AS(load_scenarios(scenario_path), ConfigError);
    std::ofstream(scenario_path) << nlohmann::json::array(
        {{{"problem_essence", "x"}, {"gold_spcs", {"a"}}}});
    CHECK_THROWS_AS(load_scenarios(scenario_path), ConfigError);  // missing root_cause
    std::ofstream(scenario_path) << "not json";
    CHECK_THROWS_AS(load_scenarios(scenario_path), IoError);
    CHECK_THROWS_AS(load_scenarios(dir.path / "absent.json"), IoError);

    auto persona_path = dir.path / "personas.json";
    std::ofstream(persona_path) << nlohmann::json{{"age", {{"range", {25, 35}}}},
                                                  {"gender", {{"categories", {"woman"}}}},
                                                  {"occupation", {{"categories", {"chef"}}}}};
    auto dists = load_persona_distributions(persona_path);
    Persona p = sample_persona(dists, 3);
    CHECK(p.age >= 25);
    CHECK(p.age <= 35);
    CHECK(p.occupation == "chef");
    CHECK_THROWS_AS(load_persona_distributions(dir.path / "absent.json"), IoError);
}

TEST_CASE("a simulated conversation alternates and stops on resolution") {
    SimRig rig;
    rig.chat->script(kSimUserTag,
                     {ScriptStep::reply("My disk fills up every week no matter what I delete"),
                      ScriptStep::reply("Mostly videos and some old installers"),
                      ScriptStep::reply("Thanks, that fixed it [[RESOLVED]]")});
    rig.chat->script(kSimAssistantTag,
                     {ScriptStep::reply("Which kinds of files grow the fastest?"),
                      ScriptStep::reply("Try clearing the download cache weekly")});

    SimulatedConversation sim =
        generate_conversation(*rig.gateway, Persona{30, "woman", "chef"},
                              make_scenario("temp files never purged"), user_config(),
                              assistant_config(), 77, {}, "sim-test");

    const Conversation& conv = sim.labeled.conversation;
    CHECK(conv.conversation_id == "sim-test");
    CHECK(conv.domain_tag == "storage");
    REQUIRE(conv.utterances.size() == 5);
    check_alternating_user_first(conv);
    CHECK(conv.utterances.back().text == "Thanks, that fixed it");  // marker stripped
    CHECK(sim.labeled.gold_spcs == std::set<std::string>{"disk-cleaner"});
    CHECK(sim.seed == 77);
    CHECK(sim.regenerations == 0);
    CHECK(sim.persona == Persona{30, "woman", "chef"});
}

TEST_CASE("a marker-only reply ends the conversation on an assistant turn") {
    SimRig rig;
    rig.chat->script(kSimUserTag, {ScriptStep::reply("The fan is loud"),
                                   ScriptStep::reply("[[RESOLVED]]")});
    rig.chat->script(kSimAssistantTag, {ScriptStep::reply("Does it spin up when idle?")});

    SimulatedConversation sim = generate_conversation(
        *rig.gateway, Persona{30, "man", "clerk"}, make_scenario("blocked vent"), user_config(),
        assistant_config(), 1);
    REQUIRE(sim.labeled.conversation.utterances.size() == 2);
    CHECK(sim.labeled.conversation.utterances.back().role == Role::Assistant);
}

TEST_CASE("conversation length is capped by the exchange budget") {
    SimRig rig;
    rig.chat->script(kSimUserTag, {ScriptStep::reply("it is still broken")});
    rig.chat->script(kSimAssistantTag, {ScriptStep::reply("tell me more")});

    SimulatedConversation sim = generate_conversation(
        *rig.gateway, Persona{40, "woman", "welder"}, make_scenario("corroded cable"),
        user_config(), assistant_config(), 5);
    CHECK(sim.labeled.conversation.utterances.size() == 9);  // opener + 4 exchanges
    check_alternating_user_first(sim.labeled.conversation);

    SimOptions short_run;
    short_run.max_exchanges = 1;
    SimulatedConversation brief = generate_conversation(
        *rig.gateway, Persona{40, "woman", "welder"}, make_scenario("corroded cable"),
        user_config(), assistant_config(), 5, short_run);
    CHECK(brief.labeled.conversation.utterances.size() == 3);
}

TEST_CASE("a leaked root cause regenerates the whole conversation") {
    SimRig rig;
    SimOptions opener_only;
    opener_only.max_exchanges = 0;
    rig.chat->script(kSimUserTag,
                     {ScriptStep::reply("I think Dust In The Fan is causing this"),
                      ScriptStep::reply("My laptop gets very hot under load")});

    SimulatedConversation sim = generate_conversation(
        *rig.gateway, Persona{25, "man", "student"}, make_scenario("dust in the fan"),
        user_config(), assistant_config(), 9, opener_only);
    CHECK(sim.regenerations == 1);
    REQUIRE(sim.labeled.conversation.utterances.size() == 1);
    CHECK(sim.labeled.conversation.utterances[0].text == "My laptop gets very hot under load");
    CHECK(rig.chat->calls(kSimUserTag) == 2);
}

TEST_CASE("a mid-conversation leak regenerates from the opener") {
    SimRig rig;
    SimOptions one_exchange;
    one_exchange.max_exchanges = 1;
    rig.chat->script(kSimUserTag,
                     {ScriptStep::reply("Pages take forever to load"),
                      ScriptStep::reply("Probably the ROUTER FIRMWARE BUG acting up"),
                      ScriptStep::reply("Pages take forever to load"),
                      ScriptStep::reply("Only in the evenings [[RESOLVED]]")});
    rig.chat->script(kSimAssistantTag, {ScriptStep::reply("When does it slow down?")});

    SimulatedConversation sim = generate_conversation(
        *rig.gateway, Persona{52, "woman", "teacher"}, make_scenario("router firmware bug"),
        user_config(), assistant_config(), 12, one_exchange);
    CHECK(sim.regenerations == 1);
    REQUIRE(sim.labeled.conversation.utterances.size() == 3);
    CHECK(sim.labeled.conversation.utterances[2].text == "Only in the evenings");
}

TEST_CASE("the regeneration budget exhausts into a disclosure violation") {
    SimRig rig;
    SimOptions opts;
    opts.max_exchanges = 0;
    opts.max_regenerations = 2;
    rig.chat->script(kSimUserTag, {ScriptStep::reply("honestly the expired tls cert is at fault")});

    CHECK_THROWS_WITH_AS(
        generate_conversation(*rig.gateway, Persona{33, "man", "clerk"},
                              make_scenario("expired TLS cert"), user_config(),
                              assistant_config(), 4, opts, "sim-x"),
        doctest::Contains("after 2 regenerations"), DisclosureViolation);
    CHECK(rig.chat->calls(kSimUserTag) == 3);
}

TEST_CASE("an opener that folds to nothing is a refusal") {
    SimRig rig;
    rig.chat->script(kSimUserTag, {ScriptStep::reply("[[RESOLVED]]")});
    CHECK_THROWS_AS(generate_conversation(*rig.gateway, Persona{33, "man", "clerk"},
                                          make_scenario("anything"), user_config(),
                                          assistant_config(), 4),
                    BackendRefusal);
}

TEST_CASE("dataset generation walks the scenario grid deterministically") {
    auto scripted_rig = [] {
        SimRig rig;
        rig.chat->script(kSimUserTag, {ScriptStep::reply("files pile up"),
                                       ScriptStep::reply("downloads everywhere"),
                                       ScriptStep::reply("mail keeps bouncing"),
                                       ScriptStep::reply("attachments rejected")});
        return rig;
    };
    std::vector<ScenarioSpec> scenarios = {make_scenario("temp files"),
                                           make_scenario("oversized mailbox", {"spam-filter"})};
    PersonaDistributions dists;
    dists.age.range = {20, 60};
    dists.gender.categories = {"woman", "man"};
    dists.occupation.categories = {"chef", "teacher", "welder"};
    SimOptions opener_only;
    opener_only.max_exchanges = 0;

    SimRig rig = scripted_rig();
    GeneratedDataset ds = generate_dataset(*rig.gateway, scenarios, dists, user_config(),
                                           assistant_config(), 2, 31, opener_only);
    REQUIRE(ds.conversations.size() == 4);
    CHECK(ds.conversations[0].labeled.conversation.conversation_id == "sim-0-0");
    CHECK(ds.conversations[1].labeled.conversation.conversation_id == "sim-0-1");
    CHECK(ds.conversations[2].labeled.conversation.conversation_id == "sim-1-0");
    CHECK(ds.conversations[3].labeled.conversation.conversation_id == "sim-1-1");
    CHECK(ds.conversations[2].labeled.gold_spcs == std::set<std::string>{"spam-filter"});
    CHECK(ds.conversations[0].labeled.conversation.domain_tag == "storage");

    CHECK(ds.manifest.base_seed == 31);
    CHECK(ds.manifest.n_per_scenario == 2);
    CHECK(ds.manifest.n_scenarios == 2);
    CHECK(ds.manifest.n_conversations == 4);
    CHECK(ds.manifest.total_rejections == 0);
    CHECK(ds.manifest.user_model_id == "sim-user-model");
    CHECK(ds.manifest.assistant_model_id == "sim-assistant-model");
    CHECK(ds.manifest.failures.empty());

    SimRig rig2 = scripted_rig();
    GeneratedDataset again = generate_dataset(*rig2.gateway, scenarios, dists, user_config(),
                                              assistant_config(), 2, 31, opener_only);
    CHECK(ds.labeled() == again.labeled());
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(ds.conversations[i].persona == again.conversations[i].persona);
        CHECK(ds.conversations[i].seed == again.conversations[i].seed);
    }

    // a different base seed redraws the personas
    SimRig rig3 = scripted_rig();
    GeneratedDataset other = generate_dataset(*rig3.gateway, scenarios, dists, user_config(),
                                              assistant_config(), 2, 32, opener_only);
    bool any_persona_differs = false;
    for (std::size_t i = 0; i < 4; ++i)
        if (other.conversations[i].persona != ds.conversations[i].persona)
            any_persona_differs = true;
    CHECK(any_persona_differs);
}

TEST_CASE("dataset generation records failures and keeps going") {
    SimRig rig;
    rig.chat->script(kSimUserTag,
                     {ScriptStep::reply("the alpha beta thing is broken"),  // leak, scenario 0
                      ScriptStep::reply("files troubling me"),              // clean retry
                      ScriptStep::reply("gamma delta happens"),             // scenario 1 leaks...
                      ScriptStep::reply("gamma delta again"),
                      ScriptStep::reply("the gamma delta"),
                      ScriptStep::reply("still gamma delta")});             // ...four times
    std::vector<ScenarioSpec> scenarios = {make_scenario("alpha beta"),
                                           make_scenario("gamma delta")};
    SimOptions opener_only;
    opener_only.max_exchanges = 0;

    GeneratedDataset ds = generate_dataset(*rig.gateway, scenarios, fixed_personas(),
                                           user_config(), assistant_config(), 1, 5, opener_only);
    CHECK(ds.manifest.n_conversations == 1);
    CHECK(ds.manifest.total_rejections == 5);  // one retry plus four failed attempts
    REQUIRE(ds.manifest.failures.size() == 1);
    CHECK(ds.manifest.failures[0].at("scenario_index") == 1);
    CHECK(ds.manifest.failures[0].at("rep") == 0);
    CHECK(ds.manifest.failures[0].at("error").get<std::string>().find("sim-1-0") !=
          std::string::npos);
    REQUIRE(ds.conversations.size() == 1);
    CHECK(ds.conversations[0].regenerations == 1);

    nlohmann::json manifest = ds.manifest.to_json();
    CHECK(manifest["total_rejections"] == 5);
    CHECK(manifest["failures"].size() == 1);
}

TEST_CASE("dataset generation validates its inputs") {
    SimRig rig;
    CHECK_THROWS_AS(generate_dataset(*rig.gateway, {}, fixed_personas(), user_config(),
                                     assistant_config(), 1, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(generate_dataset(*rig.gateway, {make_scenario("x")}, fixed_personas(),
                                     user_config(), assistant_config(), 0, 0),
                    std::invalid_argument);

    toy::World world = toy::make_world(0);
    CHECK_THROWS_AS(generate_dataset(*rig.gateway, {make_scenario("x", {"unknown-spc"})},
                                     fixed_personas(), user_config(), assistant_config(), 1, 0,
                                     {}, world.store.get()),
                    ConfigError);

    SimOptions opener_only;
    opener_only.max_exchanges = 0;
    rig.chat->script(kSimUserTag, {ScriptStep::reply("clean opener")});
    GeneratedDataset ds =
        generate_dataset(*rig.gateway, {make_scenario("y")}, fixed_personas(), user_config(),
                         assistant_config(), 1, 0, opener_only, world.store.get());
    CHECK(ds.manifest.n_conversations == 1);
}
