#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "idealband/model.hpp"

namespace idealband {

/// One interval-annotation job against a chat-completion endpoint.
struct AnnotationRequest {
  std::string propensity_name;
  std::string rubric_text;
  std::string question_text;
  std::string model_name;
  std::string endpoint;  // e.g. http://127.0.0.1:8900 or https://host/v1
  double temperature = 0.0;
};

struct Prompt {
  std::string system_text;
  std::string user_text;
};

/// The fixed system sentence plus the user template with {propensity_name},
/// {rubric}, and {question_text} substituted in a single pass (inserted text
/// is never re-scanned, so braces in questions survive literally).
/// Throws TemplateError when any of the three values is empty.
Prompt build_prompt(const AnnotationRequest& request);

/// Scans for the LAST occurrence of "propensity range is [x, y]" (integer
/// tokens, optional sign, whitespace-tolerant, case-insensitive) and returns
/// the window (x, y) with unit discrimination.
/// Throws ParseFailure (no match), OrderViolation (x > y), RangeViolation
/// (outside [-3, +3]).
PropensityWindow parse_interval(const std::string& response_text);

/// Content-addressed on-disk response store: one JSON record per key, written
/// atomically, idempotent for identical keys, safe for concurrent distinct
/// keys.  An annotation is a pure function of (propensity, rubric, question,
/// model), which is exactly what the key hashes.
class AnnotationCache {
 public:
  explicit AnnotationCache(std::filesystem::path dir);

  static std::string key(const AnnotationRequest& request);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& raw_response) const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

enum class AnnotationStatus { Ok, NetworkError, ParseFailure };

std::string to_string(AnnotationStatus status);

struct AnnotationResult {
  AnnotationStatus status = AnnotationStatus::NetworkError;
  std::optional<PropensityWindow> window;  // set iff status == Ok
  std::string raw_response;
  bool cached = false;
  std::string error;  // failure detail, empty on Ok
};

struct RetryPolicy {
  int max_retries = 2;           // attempts after the first, on transport/429/5xx
  int initial_backoff_ms = 100;  // doubles per retry
  int timeout_sec = 30;
  /// Bearer token; empty falls back to IDEALBAND_API_KEY then OPENAI_API_KEY,
  /// and no Authorization header is sent when all are unset.
  std::string api_key;
};

/// Annotates every request, at most concurrency_limit in flight.  Results
/// align with request order regardless of completion order.  Cache hits skip
/// the network entirely; per-item failures are recorded, never thrown.
/// `cache` may be nullptr to disable caching.
std::vector<AnnotationResult> annotate_batch(
    const std::vector<AnnotationRequest>& requests,
    std::size_t concurrency_limit, const AnnotationCache* cache,
    const RetryPolicy& policy = {});

}  // namespace idealband
