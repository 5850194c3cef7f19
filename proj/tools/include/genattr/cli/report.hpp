#pragma once

#include <string>

#include <json.hpp>

namespace genattr::cli {

// Self-contained HTML page for one explained record (the JSON emitted by
// explain). The generation timestamp is left out when `reproducible` is set.
std::string render_explain_html(const nlohmann::ordered_json& record, bool reproducible);

std::string html_escape(std::string_view text);

}  // namespace genattr::cli
