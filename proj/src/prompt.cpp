#include "homellm/prompt.hpp"

#include "homellm/error.hpp"

namespace homellm {

namespace {

bool is_blank(std::string_view text) {
    return text.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

} // namespace

Prompt build_prompt(const HomeContext& context, const Command& command) {
    if (is_blank(command.text)) throw Error(Errc::EmptyCommand, "command text is empty");

    Prompt p;
    p.framing = prompt_text::framing;
    p.context_segment = std::string(prompt_text::devices_intro) + serialize_devices(context) +
                        std::string(prompt_text::user_intro) + serialize_user(context.user);
    p.command_segment = std::string(prompt_text::command_intro) + command.text + std::string(prompt_text::command_outro);
    p.formatting = prompt_text::formatting;
    p.assembled = p.framing + ' ' + p.context_segment + ' ' + p.command_segment + ' ' + p.formatting;
    return p;
}

std::size_t estimate_prompt_size(const Prompt& prompt) {
    std::size_t n = 0;
    for (unsigned char c : prompt.assembled)
        if ((c & 0xC0) != 0x80) ++n;
    return n;
}

PromptParts split_prompt(std::string_view text) {
    auto fail = [](const char* what) { return Error(Errc::UnparseablePrompt, what); };

    const std::string head = std::string(prompt_text::framing) + ' ' + std::string(prompt_text::devices_intro);
    if (text.substr(0, head.size()) != head) throw fail("framing/context segment not found");

    const std::string tail = std::string(prompt_text::command_outro) + ' ' + std::string(prompt_text::formatting);
    if (text.size() < head.size() + tail.size() || text.substr(text.size() - tail.size()) != tail)
        throw fail("formatting segment not found");

    // The serialized context never contains the user intro sentence, but the
    // command may, so search the context forward and the command backward.
    auto user_at = text.find(prompt_text::user_intro, head.size());
    if (user_at == std::string_view::npos) throw fail("user segment not found");
    const std::string cmd_intro = ' ' + std::string(prompt_text::command_intro);
    auto cmd_at = text.find(cmd_intro, user_at + prompt_text::user_intro.size());
    if (cmd_at == std::string_view::npos) throw fail("command segment not found");
    const std::size_t cmd_begin = cmd_at + cmd_intro.size();
    const std::size_t cmd_end = text.size() - tail.size();
    if (cmd_end < cmd_begin) throw fail("command segment malformed");

    PromptParts parts;
    parts.devices_json = std::string(text.substr(head.size(), user_at - head.size()));
    parts.user_json = std::string(
        text.substr(user_at + prompt_text::user_intro.size(), cmd_at - user_at - prompt_text::user_intro.size()));
    parts.command = std::string(text.substr(cmd_begin, cmd_end - cmd_begin));
    return parts;
}

} // namespace homellm
