#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace luq {

enum class ErrorCode {
  invalid_argument,
  io,
  parse,
  // sampling
  empty_entity,
  provider_unreachable,
  auth_failure,
  malformed_provider_reply,
  invalid_regex,
  // decomposition / entailment
  splitter_unavailable,
  non_finite_logit,
  scorer_unavailable,
  // estimation
  empty_response,
  unscorable_pair,
  all_pairs_unscorable,
  main_refused,
  missing_logprobs,
  zero_row_sum,
  // evaluation
  constant_input,
  length_mismatch,
  out_of_range,
  insufficient_data,
  unbounded_method_for_pus,
  coverage_gap,
  empty_retained_set,
  all_unknown,
  join_empty,
};

/// Kebab-case identifier used in manifests and score records.
std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace luq
