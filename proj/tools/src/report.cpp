#include "genattr/cli/report.hpp"

#include <chrono>
#include <ctime>
#include <sstream>

namespace genattr::cli {

std::string html_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

void level_table(std::ostringstream& html, const nlohmann::ordered_json& level) {
  html << "<h2>Level " << level.at("level").get<int>() << "</h2>\n";
  if (level.contains("important")) {
    html << "<p>Refined at threshold " << fixed(level.at("threshold").get<double>())
         << ": " << level.at("important").size() << " node(s)</p>\n";
  }
  html << "<table>\n<tr><th>node</th><th>kind</th><th>text</th><th>answer masses</th>"
          "<th>total</th></tr>\n";
  for (const auto& node : level.at("nodes")) {
    const double total = node.at("total").get<double>();
    const double alpha = std::min(1.0, std::max(0.0, total));
    html << "<tr><td>" << node.at("id").get<int>() << "</td><td>"
         << html_escape(node.at("kind").get<std::string>()) << "</td><td>"
         << html_escape(node.at("text").get<std::string>()) << "</td><td>";
    bool first = true;
    for (const auto& [answer, mass] : node.at("masses").items()) {
      if (!first) html << "<br>";
      first = false;
      html << html_escape(answer) << ": " << fixed(mass.get<double>());
    }
    html << "</td><td style=\"background: rgba(220, 80, 40, " << fixed(alpha, 2) << ")\">"
         << fixed(total) << "</td></tr>\n";
  }
  html << "</table>\n";
}

}  // namespace

std::string render_explain_html(const nlohmann::ordered_json& record, bool reproducible) {
  std::ostringstream html;
  const std::string qid = record.at("query_id").get<std::string>();
  html << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n";
  if (!reproducible) html << "<meta name=\"generated\" content=\"" << utc_now() << "\">\n";
  html << "<title>Attribution for " << html_escape(qid) << "</title>\n"
       << "<style>body{font-family:sans-serif;margin:2em}table{border-collapse:collapse}"
          "td,th{border:1px solid #ccc;padding:4px 8px;vertical-align:top}</style>\n"
       << "</head>\n<body>\n";
  html << "<h1>" << html_escape(record.at("question").get<std::string>()) << "</h1>\n";
  html << "<p>Answer: <b>" << html_escape(record.at("answer").get<std::string>()) << "</b></p>\n";

  const auto& stats = record.at("call_stats");
  html << "<p>Model calls: " << stats.at("encoder_calls").get<std::uint64_t>() << " encoder, "
       << stats.at("decoder_calls").get<std::uint64_t>() << " decoder, "
       << stats.at("verification_calls").get<std::uint64_t>() << " verification</p>\n";

  for (const auto& level : record.at("levels")) level_table(html, level);

  if (!reproducible) html << "<footer>Generated " << utc_now() << "</footer>\n";
  html << "</body>\n</html>\n";
  return html.str();
}

}  // namespace genattr::cli
