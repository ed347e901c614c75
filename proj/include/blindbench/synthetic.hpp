#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "blindbench/llmclient.hpp"

namespace blindbench {

/// Deterministic reply of a synthetic backend to a conversation.
std::string synthetic_reply(const SyntheticBackendSpec& spec,
                            std::span<const ChatMessage> messages);

/// Token count for SMILES, code-point count for anything else. A 1-token ->
/// 1-character cipher leaves it unchanged.
std::size_t structural_token_count(std::string_view input);

/// Test input of a prediction message (zero-shot or blinded layout).
std::optional<std::string> extract_test_input(std::string_view prediction_message);

/// (input, value) examples present in the conversation: the analysis lists
/// plus any sample-list rows.
std::vector<std::pair<std::string, double>> extract_examples(
    std::span<const ChatMessage> messages);

}  // namespace blindbench
