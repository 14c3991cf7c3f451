#pragma once

#include <chrono>
#include <cstddef>
#include <string>

#include "homellm/context.hpp"

namespace homellm {

struct Command {
    std::string text;
    std::chrono::system_clock::time_point issued_at = std::chrono::system_clock::now();
};

/// The four prompt segments and their single-space-joined concatenation.
struct Prompt {
    std::string framing;
    std::string context_segment;
    std::string command_segment;
    std::string formatting;
    std::string assembled;
};

namespace prompt_text {
inline constexpr std::string_view framing = "You are an AI that controls a smart home.";
inline constexpr std::string_view devices_intro = "Here is the state of the devices in the home, in JSON format: ";
inline constexpr std::string_view user_intro = " Here is information about the user: ";
inline constexpr std::string_view command_intro = "The user issues the command: ";
inline constexpr std::string_view command_outro = ". Change the device state as appropriate.";
inline constexpr std::string_view formatting = "Provide your response in JSON format.";
} // namespace prompt_text

/// Throws EmptyCommand if the command is blank after trimming.
Prompt build_prompt(const HomeContext& context, const Command& command);

/// Length of the assembled prompt in Unicode code points.
std::size_t estimate_prompt_size(const Prompt& prompt);

/// Segments recovered from assembled prompt text (the inverse of build_prompt).
struct PromptParts {
    std::string devices_json;
    std::string user_json;
    std::string command;
};

/// Throws UnparseablePrompt when the fixed segment text is not found.
PromptParts split_prompt(std::string_view assembled);

} // namespace homellm
