#include <scenesmith/pipeline.hpp>

#include <httplib.h>

#include <regex>

namespace scenesmith {

HttpResult http_post_json(const std::string& url, const std::string& body, double timeout_s)
{
    static const std::regex split(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, split)) return {std::nullopt, "malformed URL " + url};
    const std::string path = m[2].matched ? m[2].str() : "/";
    httplib::Client client(m[1].str());
    const auto secs = static_cast<time_t>(timeout_s);
    const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    auto res = client.Post(path, body, "application/json");
    if (!res) return {std::nullopt, httplib::to_string(res.error())};
    if (res->status < 200 || res->status >= 300) return {std::nullopt, "HTTP status " + std::to_string(res->status)};
    return {res->body, ""};
}

} // namespace scenesmith
