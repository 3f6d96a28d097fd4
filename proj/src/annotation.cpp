#include "idealband/annotation.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "httplib.h"
#include "json.hpp"

namespace idealband {

namespace {

using nlohmann::json;

constexpr const char* kSystemPrompt =
    "You are an expert at analyzing questions for cognitive biases.";

/// Fixed user template for rubric-based interval annotation.  The three
/// placeholders are filled by build_prompt; everything else is sent verbatim.
constexpr const char* kUserTemplate =
    "The following is a rubric for determining the propensity of showing "
    "bias towards {propensity_name}:\n"
    "<rubric>\n"
    "{rubric}\n"
    "</rubric>\n"
    "Your task is to determine the propensity range for a given question.\n"
    "First, identify which option is the unbiased option (as defined by the "
    "rubric). \n"
    "Then, determine the lower and upper bounds of the propensity range "
    "separately. \n"
    "Note: Throughout this task, \"would select the unbiased option\" means "
    "\"would select the unbiased option with >50% probability\".\n"
    "For each level you consider, explicitly state:\n"
    "  a) What the rubric says about this level\n"
    "  b) The relevant comparison for this problem (quantitative if "
    "applicable)\n"
    "  c) Whether an agent at this level would select the unbiased option "
    "(Yes/No), and why\n"
    "LOWER BOUND:\n"
    "Work downward from 0: Would a level -1 agent select the unbiased "
    "option? If yes, would level -2? Continue until you find a level that "
    "would NOT select the unbiased option, then stop.\n"
    "The lower bound is the LAST level that WOULD select the unbiased option "
    "(i.e., the lowest Yes). If level -2 is Yes and level -3 is No, then the "
    "lower bound is -2. If all levels down to -3 are Yes, the lower bound is "
    "-3.\n"
    "UPPER BOUND:\n"
    "Work upward from 0: Would a level +1 agent select the unbiased option? "
    "If yes, would level +2? Continue until you find a level that would NOT "
    "select the unbiased option, then stop.\n"
    "The upper bound is the LAST level that WOULD select the unbiased option "
    "(i.e., the highest Yes). If level +2 is Yes and level +3 is No, then the "
    "upper bound is +2. If all levels up to +3 are Yes, the upper bound is "
    "+3.\n"
    "Now, given the following question:\n"
    "<question>\n"
    "{question_text}\n"
    "</question>\n"
    "Give your final answer in the format 'The propensity range is [LOWER "
    "BOUND, UPPER BOUND]'";

/// Single left-to-right pass: each placeholder hit is replaced by its value,
/// and inserted values are never re-scanned.
std::string render_template(const std::string& tmpl,
                            const AnnotationRequest& request) {
  struct Slot {
    const char* token;
    const std::string* value;
  };
  const Slot slots[] = {
      {"{propensity_name}", &request.propensity_name},
      {"{rubric}", &request.rubric_text},
      {"{question_text}", &request.question_text},
  };
  std::string out;
  out.reserve(tmpl.size() + request.rubric_text.size() +
              request.question_text.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    bool replaced = false;
    for (const Slot& slot : slots) {
      const std::size_t len = std::char_traits<char>::length(slot.token);
      if (tmpl.compare(i, len, slot.token) == 0) {
        out += *slot.value;
        i += len;
        replaced = true;
        break;
      }
    }
    if (!replaced) out += tmpl[i++];
  }
  return out;
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string resolved_api_key(const RetryPolicy& policy) {
  if (!policy.api_key.empty()) return policy.api_key;
  for (const char* var : {"IDEALBAND_API_KEY", "OPENAI_API_KEY"}) {
    if (const char* v = std::getenv(var); v && *v) return v;
  }
  return {};
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// Splits an endpoint URL into the scheme://host[:port] base and the
/// chat-completions path.  A bare base gets the conventional
/// /v1/chat/completions; a path ending in /v1 gets /chat/completions
/// appended; a path already ending in /chat/completions is used as-is.
struct EndpointParts {
  std::string base;
  std::string path;
};

std::optional<EndpointParts> split_endpoint(const std::string& endpoint) {
  const std::size_t scheme = endpoint.find("://");
  if (scheme == std::string::npos) return std::nullopt;
  const std::size_t slash = endpoint.find('/', scheme + 3);
  EndpointParts parts;
  parts.base = slash == std::string::npos ? endpoint : endpoint.substr(0, slash);
  std::string prefix =
      slash == std::string::npos ? "" : endpoint.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  if (ends_with(prefix, "/chat/completions")) {
    parts.path = prefix;
  } else if (ends_with(prefix, "/v1")) {
    parts.path = prefix + "/chat/completions";
  } else {
    parts.path = prefix + "/v1/chat/completions";
  }
  return parts;
}

struct HttpOutcome {
  bool ok = false;
  std::string text;  // content on ok, error detail otherwise
};

HttpOutcome chat_completion(const AnnotationRequest& request,
                            const RetryPolicy& policy) {
  const auto parts = split_endpoint(request.endpoint);
  if (!parts) return {false, "invalid endpoint URL"};

  const Prompt prompt = build_prompt(request);
  const json body = {
      {"model", request.model_name},
      {"messages",
       json::array({json{{"role", "system"}, {"content", prompt.system_text}},
                    json{{"role", "user"}, {"content", prompt.user_text}}})},
      {"temperature", request.temperature},
  };

  httplib::Client client(parts->base);
  client.set_connection_timeout(policy.timeout_sec);
  client.set_read_timeout(policy.timeout_sec);
  httplib::Headers headers;
  if (const std::string key = resolved_api_key(policy); !key.empty()) {
    headers.emplace("Authorization", "Bearer " + key);
  }

  std::string last_error = "no attempt made";
  int backoff_ms = policy.initial_backoff_ms;
  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      backoff_ms *= 2;
    }
    auto res =
        client.Post(parts->path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport: " + httplib::to_string(res.error());
      continue;  // retriable
    }
    if (res->status == 200) {
      try {
        const json reply = json::parse(res->body);
        return {true, reply.at("choices").at(0).at("message").at("content")
                          .get<std::string>()};
      } catch (const json::exception&) {
        return {false, "malformed response body"};
      }
    }
    last_error = "http status " + std::to_string(res->status);
    if (res->status != 429 && res->status < 500) break;  // permanent
  }
  return {false, last_error};
}

AnnotationResult annotate_one(const AnnotationRequest& request,
                              const AnnotationCache* cache,
                              const RetryPolicy& policy) {
  AnnotationResult result;
  const std::string key = AnnotationCache::key(request);
  bool fetched = false;
  if (cache) {
    if (auto hit = cache->get(key)) {
      result.raw_response = *hit;
      result.cached = true;
    }
  }
  if (!result.cached) {
    const HttpOutcome outcome = chat_completion(request, policy);
    if (!outcome.ok) {
      result.status = AnnotationStatus::NetworkError;
      result.error = outcome.text;
      return result;
    }
    result.raw_response = outcome.text;
    fetched = true;
  }
  try {
    result.window = parse_interval(result.raw_response);
    result.status = AnnotationStatus::Ok;
  } catch (const Error& e) {
    result.status = AnnotationStatus::ParseFailure;
    result.error = e.what();
  }
  if (fetched && cache) cache->put(key, result.raw_response);
  return result;
}

}  // namespace

Prompt build_prompt(const AnnotationRequest& request) {
  if (request.propensity_name.empty() || request.rubric_text.empty() ||
      request.question_text.empty()) {
    throw TemplateError(
        "propensity_name, rubric_text, and question_text must be non-empty");
  }
  return Prompt{kSystemPrompt, render_template(kUserTemplate, request)};
}

PropensityWindow parse_interval(const std::string& response_text) {
  static const std::regex pattern(
      R"(propensity\s+range\s+is\s*\[\s*([+-]?\d+)\s*,\s*([+-]?\d+)\s*\])",
      std::regex::icase);
  std::smatch last;
  bool found = false;
  auto begin = std::sregex_iterator(response_text.begin(), response_text.end(),
                                    pattern);
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    last = *it;
    found = true;
  }
  if (!found) {
    throw ParseFailure("no 'propensity range is [x, y]' answer found");
  }
  const int lo = std::stoi(last[1].str());
  const int hi = std::stoi(last[2].str());
  if (lo > hi) {
    throw OrderViolation("interval bounds out of order: [" +
                         std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  if (lo < -3 || hi > 3) {
    throw RangeViolation("interval outside the rubric scale [-3, +3]: [" +
                         std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return PropensityWindow{static_cast<double>(lo), static_cast<double>(hi),
                          1.0};
}

AnnotationCache::AnnotationCache(std::filesystem::path dir)
    : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::string AnnotationCache::key(const AnnotationRequest& request) {
  // Length-prefixed concatenation so field boundaries are unambiguous.
  auto field = [](const std::string& s) {
    return std::to_string(s.size()) + ":" + s;
  };
  return sha256_hex(field(request.propensity_name) +
                    field(request.rubric_text) + field(request.question_text) +
                    field(request.model_name));
}

std::optional<std::string> AnnotationCache::get(const std::string& key) const {
  const auto path = dir_ / (key + ".json");
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    const json record = json::parse(buffer.str());
    return record.at("raw_response").get<std::string>();
  } catch (const json::exception&) {
    return std::nullopt;  // treat a corrupt record as a miss
  }
}

void AnnotationCache::put(const std::string& key,
                          const std::string& raw_response) const {
  const json record = {{"raw_response", raw_response}};
  // Unique temp per writer, then an atomic rename: concurrent writers of the
  // same key each install a complete record, last one wins.
  std::ostringstream tmp_name;
  tmp_name << key << ".tmp." << std::this_thread::get_id();
  const auto tmp = dir_ / tmp_name.str();
  {
    std::ofstream out(tmp);
    out << record.dump();
    if (!out) throw IoError("cannot write cache record in " + dir_.string());
  }
  std::filesystem::rename(tmp, dir_ / (key + ".json"));
}

std::string to_string(AnnotationStatus status) {
  switch (status) {
    case AnnotationStatus::Ok:
      return "ok";
    case AnnotationStatus::NetworkError:
      return "network_error";
    case AnnotationStatus::ParseFailure:
      return "parse_failure";
  }
  throw Error("unknown annotation status");
}

std::vector<AnnotationResult> annotate_batch(
    const std::vector<AnnotationRequest>& requests,
    std::size_t concurrency_limit, const AnnotationCache* cache,
    const RetryPolicy& policy) {
  std::vector<AnnotationResult> results(requests.size());
  if (requests.empty()) return results;
  const std::size_t workers =
      std::max<std::size_t>(1, std::min(concurrency_limit, requests.size()));
  std::atomic<std::size_t> next{0};
  auto run = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      results[i] = annotate_one(requests[i], cache, policy);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  return results;
}

}  // namespace idealband
