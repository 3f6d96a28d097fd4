// Annotation tests: prompt templating, the interval grammar, the
// content-addressed response cache, and batched annotation against a local
// mock chat endpoint.
#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"
#include "httplib.h"
#include "idealband/annotation.hpp"
#include "json.hpp"

using namespace idealband;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

AnnotationRequest make_request(const std::string& question,
                               const std::string& endpoint = "") {
  AnnotationRequest req;
  req.propensity_name = "risk tolerance";
  req.rubric_text = "Level 0 agents weigh odds evenly.";
  req.question_text = question;
  req.model_name = "mock-model";
  req.endpoint = endpoint;
  return req;
}

fs::path fresh_dir(const std::string& tag) {
  const auto dir = fs::temp_directory_path() /
                   ("idealband_annotation_" + tag + "_" +
                    std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

/// Local chat-completions stand-in.  The reply content is steered by a
/// "reply=..." directive embedded in the question text, and every handled
/// request bumps an atomic counter.
class MockEndpoint {
 public:
  MockEndpoint() {
    server_.Post("/v1/chat/completions",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   ++hits_;
                   last_body_ = req.body;
                   const json body = json::parse(req.body);
                   const std::string user =
                       body.at("messages").at(1).at("content");
                   std::smatch m;
                   static const std::regex directive(R"(reply=<([^>]*)>)");
                   std::string content = "no directive found";
                   if (std::regex_search(user, m, directive)) {
                     content = m[1].str();
                   }
                   const json reply = {
                       {"choices",
                        json::array({json{
                            {"message", json{{"role", "assistant"},
                                             {"content", content}}}}})}};
                   res.set_content(reply.dump(), "application/json");
                 });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockEndpoint() {
    server_.stop();
    thread_.join();
  }

  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port_);
  }
  int hits() const { return hits_.load(); }
  std::string last_body() const { return last_body_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
  std::string last_body_;
};

}  // namespace

TEST_CASE("prompt construction") {
  const auto req = make_request("Pick portfolio A or B.");
  const Prompt prompt = build_prompt(req);

  CHECK_FALSE(prompt.system_text.empty());
  CHECK(prompt.user_text.find("risk tolerance") != std::string::npos);
  CHECK(prompt.user_text.find("Level 0 agents weigh odds evenly.") !=
        std::string::npos);
  CHECK(prompt.user_text.find("Pick portfolio A or B.") != std::string::npos);

  // placeholders are gone after rendering
  CHECK(prompt.user_text.find("{propensity_name}") == std::string::npos);
  CHECK(prompt.user_text.find("{rubric}") == std::string::npos);
  CHECK(prompt.user_text.find("{question_text}") == std::string::npos);

  // fixed scaffolding survives verbatim
  CHECK(prompt.user_text.find("<rubric>") != std::string::npos);
  CHECK(prompt.user_text.find("</question>") != std::string::npos);
  CHECK(prompt.user_text.find("The propensity range is [LOWER BOUND, UPPER "
                              "BOUND]") != std::string::npos);

  SUBCASE("identical inputs render identically") {
    const Prompt again = build_prompt(req);
    CHECK(again.system_text == prompt.system_text);
    CHECK(again.user_text == prompt.user_text);
  }

  SUBCASE("braces in values survive the single substitution pass") {
    auto tricky = req;
    tricky.question_text = "Is {rubric} literal here? {propensity_name} too.";
    const Prompt p = build_prompt(tricky);
    CHECK(p.user_text.find("Is {rubric} literal here? {propensity_name} too.") !=
          std::string::npos);
  }

  SUBCASE("empty fields are rejected") {
    auto bad = req;
    bad.propensity_name.clear();
    CHECK_THROWS_AS(build_prompt(bad), TemplateError);
    bad = req;
    bad.rubric_text.clear();
    CHECK_THROWS_AS(build_prompt(bad), TemplateError);
    bad = req;
    bad.question_text.clear();
    CHECK_THROWS_AS(build_prompt(bad), TemplateError);
  }
}

TEST_CASE("interval parsing") {
  SUBCASE("round-trips every valid interval") {
    for (int lo = -3; lo <= 3; ++lo) {
      for (int hi = lo; hi <= 3; ++hi) {
        const std::string text = "Reasoning...\nThe propensity range is [" +
                                 std::to_string(lo) + ", " +
                                 std::to_string(hi) + "]";
        const auto w = parse_interval(text);
        REQUIRE(w.two_sided());
        CHECK(*w.lower_bl == static_cast<double>(lo));
        CHECK(*w.upper_bu == static_cast<double>(hi));
        CHECK(w.base_discrimination_a == 1.0);
      }
    }
  }

  SUBCASE("the last stated answer wins") {
    const auto w = parse_interval(
        "First guess: the propensity range is [-3, 3]. On reflection, "
        "the propensity range is [-1, 2].");
    CHECK(*w.lower_bl == -1.0);
    CHECK(*w.upper_bu == 2.0);
  }

  SUBCASE("whitespace, case, and explicit plus signs are tolerated") {
    const auto w = parse_interval("The Propensity  Range IS  [ -2 ,  +1 ]");
    CHECK(*w.lower_bl == -2.0);
    CHECK(*w.upper_bu == 1.0);
  }

  SUBCASE("missing or malformed answers") {
    CHECK_THROWS_AS(parse_interval("I cannot decide."), ParseFailure);
    CHECK_THROWS_AS(parse_interval("range is [-1, 2]"), ParseFailure);
    CHECK_THROWS_AS(parse_interval("the propensity range is [1.5, 2]"),
                    ParseFailure);
    CHECK_THROWS_AS(parse_interval("the propensity range is [1, ]"),
                    ParseFailure);
  }

  SUBCASE("violations") {
    CHECK_THROWS_AS(parse_interval("the propensity range is [2, -1]"),
                    OrderViolation);
    CHECK_THROWS_AS(parse_interval("the propensity range is [-4, 0]"),
                    RangeViolation);
    CHECK_THROWS_AS(parse_interval("the propensity range is [0, 4]"),
                    RangeViolation);
    // order is checked before range
    CHECK_THROWS_AS(parse_interval("the propensity range is [4, -4]"),
                    OrderViolation);
  }
}

TEST_CASE("response cache") {
  const auto dir = fresh_dir("cache");
  const AnnotationCache cache(dir);
  const auto req = make_request("Q1");
  const std::string key = AnnotationCache::key(req);

  CHECK_FALSE(cache.get(key).has_value());

  cache.put(key, "The propensity range is [0, 2]");
  auto hit = cache.get(key);
  REQUIRE(hit.has_value());
  CHECK(*hit == "The propensity range is [0, 2]");

  SUBCASE("put is idempotent and last-write-wins") {
    cache.put(key, "The propensity range is [0, 2]");
    cache.put(key, "The propensity range is [1, 1]");
    CHECK(*cache.get(key) == "The propensity range is [1, 1]");
  }

  SUBCASE("keys separate every request field") {
    auto other = req;
    other.question_text = "Q2";
    CHECK(AnnotationCache::key(other) != key);
    other = req;
    other.rubric_text += " More.";
    CHECK(AnnotationCache::key(other) != key);
    other = req;
    other.propensity_name = "introversion";
    CHECK(AnnotationCache::key(other) != key);
    other = req;
    other.model_name = "other-model";
    CHECK(AnnotationCache::key(other) != key);
    // endpoint and temperature do not change the annotation content
    other = req;
    other.endpoint = "http://elsewhere:1";
    other.temperature = 0.7;
    CHECK(AnnotationCache::key(other) == key);
  }

  SUBCASE("field boundaries cannot be shifted between fields") {
    auto a = make_request("XY");
    a.propensity_name = "ab";
    auto b = make_request("Y");
    b.propensity_name = "ab";
    b.rubric_text = a.rubric_text;
    b.question_text = "XYX";  // same concatenation, different split
    auto c = a;
    c.question_text = "XY";
    c.rubric_text = a.rubric_text;
    CHECK(AnnotationCache::key(a) != AnnotationCache::key(b));
    CHECK(AnnotationCache::key(a) == AnnotationCache::key(c));
  }

  SUBCASE("a corrupt record reads as a miss") {
    std::ofstream(dir / (key + ".json")) << "{not json";
    CHECK_FALSE(cache.get(key).has_value());
  }

  fs::remove_all(dir);
}

TEST_CASE("batch annotation against a mock endpoint") {
  MockEndpoint mock;

  SUBCASE("results align with request order under concurrency") {
    std::vector<AnnotationRequest> requests;
    for (int i = 0; i < 40; ++i) {
      const int lo = -3 + (i % 6);
      const int hi = lo + (i % 2);
      requests.push_back(make_request(
          "q" + std::to_string(i) + " reply=<The propensity range is [" +
              std::to_string(lo) + ", " + std::to_string(hi) + "]>",
          mock.url()));
    }
    const auto results = annotate_batch(requests, 8, nullptr);
    REQUIRE(results.size() == requests.size());
    for (int i = 0; i < 40; ++i) {
      const int lo = -3 + (i % 6);
      const int hi = lo + (i % 2);
      REQUIRE(results[i].status == AnnotationStatus::Ok);
      REQUIRE(results[i].window.has_value());
      CHECK(*results[i].window->lower_bl == static_cast<double>(lo));
      CHECK(*results[i].window->upper_bu == static_cast<double>(hi));
      CHECK_FALSE(results[i].cached);
    }
    CHECK(mock.hits() == 40);
  }

  SUBCASE("wire format is the standard chat-completions body") {
    const auto results = annotate_batch(
        {make_request("reply=<The propensity range is [0, 1]>", mock.url())},
        1, nullptr);
    REQUIRE(results[0].status == AnnotationStatus::Ok);
    const json body = json::parse(mock.last_body());
    CHECK(body.at("model") == "mock-model");
    CHECK(body.at("temperature") == 0.0);
    REQUIRE(body.at("messages").size() == 2);
    CHECK(body.at("messages").at(0).at("role") == "system");
    CHECK(body.at("messages").at(1).at("role") == "user");
  }

  SUBCASE("unparseable replies surface as per-item parse failures") {
    std::vector<AnnotationRequest> requests{
        make_request("reply=<The propensity range is [1, 3]>", mock.url()),
        make_request("reply=<I refuse to commit to numbers.>", mock.url()),
        make_request("reply=<The propensity range is [3, 1]>", mock.url()),
    };
    const auto results = annotate_batch(requests, 2, nullptr);
    CHECK(results[0].status == AnnotationStatus::Ok);
    CHECK(results[1].status == AnnotationStatus::ParseFailure);
    CHECK(results[1].raw_response == "I refuse to commit to numbers.");
    CHECK_FALSE(results[1].error.empty());
    CHECK(results[2].status == AnnotationStatus::ParseFailure);
    CHECK_FALSE(results[2].window.has_value());
  }

  SUBCASE("a warm cache answers without any network traffic") {
    const auto dir = fresh_dir("warm");
    const AnnotationCache cache(dir);
    std::vector<AnnotationRequest> requests;
    for (int i = 0; i < 12; ++i) {
      requests.push_back(make_request(
          "q" + std::to_string(i) +
              " reply=<The propensity range is [-1, 2]>",
          mock.url()));
    }
    const auto cold = annotate_batch(requests, 4, &cache);
    const int hits_after_cold = mock.hits();
    CHECK(hits_after_cold >= 12);
    for (const auto& r : cold) {
      CHECK(r.status == AnnotationStatus::Ok);
      CHECK_FALSE(r.cached);
    }

    const auto warm = annotate_batch(requests, 4, &cache);
    CHECK(mock.hits() == hits_after_cold);  // zero additional requests
    for (std::size_t i = 0; i < warm.size(); ++i) {
      CHECK(warm[i].status == AnnotationStatus::Ok);
      CHECK(warm[i].cached);
      CHECK(warm[i].raw_response == cold[i].raw_response);
      CHECK(*warm[i].window->lower_bl == *cold[i].window->lower_bl);
      CHECK(*warm[i].window->upper_bu == *cold[i].window->upper_bu);
    }
    fs::remove_all(dir);
  }

  SUBCASE("parse failures cache the fetch; network failures cache nothing") {
    const auto dir = fresh_dir("nofail");
    const AnnotationCache cache(dir);
    // the fetched text is a pure function of the request, so even an
    // unparseable reply is worth keeping
    const auto req = make_request("reply=<no interval here>", mock.url());
    const auto first = annotate_batch({req}, 1, &cache);
    CHECK(first[0].status == AnnotationStatus::ParseFailure);
    const int hits = mock.hits();
    const auto second = annotate_batch({req}, 1, &cache);
    CHECK(second[0].status == AnnotationStatus::ParseFailure);
    CHECK(second[0].cached);
    CHECK(mock.hits() == hits);

    // a transport failure leaves no record behind
    auto down = make_request("anything", "http://127.0.0.1:9");
    RetryPolicy fast;
    fast.max_retries = 0;
    fast.initial_backoff_ms = 1;
    fast.timeout_sec = 2;
    const auto failed = annotate_batch({down}, 1, &cache, fast);
    CHECK(failed[0].status == AnnotationStatus::NetworkError);
    const auto retried = annotate_batch({down}, 1, &cache, fast);
    CHECK(retried[0].status == AnnotationStatus::NetworkError);
    CHECK_FALSE(retried[0].cached);
    fs::remove_all(dir);
  }
}

TEST_CASE("batch annotation with the endpoint down") {
  // nothing listens on this port; every item fails, none aborts the batch
  std::vector<AnnotationRequest> requests;
  for (int i = 0; i < 5; ++i) {
    requests.push_back(
        make_request("q" + std::to_string(i), "http://127.0.0.1:9"));
  }
  RetryPolicy fast;
  fast.max_retries = 1;
  fast.initial_backoff_ms = 1;
  fast.timeout_sec = 2;
  const auto results = annotate_batch(requests, 3, nullptr, fast);
  REQUIRE(results.size() == 5);
  for (const auto& r : results) {
    CHECK(r.status == AnnotationStatus::NetworkError);
    CHECK_FALSE(r.error.empty());
    CHECK_FALSE(r.window.has_value());
  }
}

TEST_CASE("server errors are retried") {
  // a server that fails twice with 500, then succeeds
  httplib::Server server;
  std::atomic<int> calls{0};
  server.Post("/v1/chat/completions",
              [&calls](const httplib::Request&, httplib::Response& res) {
                const int n = ++calls;
                if (n <= 2) {
                  res.status = 500;
                  res.set_content("busy", "text/plain");
                  return;
                }
                const json reply = {
                    {"choices",
                     json::array({json{
                         {"message",
                          json{{"role", "assistant"},
                               {"content", "The propensity range is [0, 0]"}}}}})}};
                res.set_content(reply.dump(), "application/json");
              });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&server] { server.listen_after_bind(); });
  server.wait_until_ready();

  RetryPolicy policy;
  policy.max_retries = 2;
  policy.initial_backoff_ms = 1;
  const auto results = annotate_batch(
      {make_request("q", "http://127.0.0.1:" + std::to_string(port))}, 1,
      nullptr, policy);
  CHECK(calls.load() == 3);
  CHECK(results[0].status == AnnotationStatus::Ok);

  server.stop();
  th.join();
}

TEST_CASE("annotation status names") {
  CHECK(to_string(AnnotationStatus::Ok) == "ok");
  CHECK(to_string(AnnotationStatus::NetworkError) == "network_error");
  CHECK(to_string(AnnotationStatus::ParseFailure) == "parse_failure");
}
