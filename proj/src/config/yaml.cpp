#include "ltree/config/yaml.hpp"

#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "ltree/core/binio.hpp"

namespace ltree::cfg {

using nlohmann::json;

namespace {

std::string strip(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

json parse_scalar(const std::string& raw) {
    std::string s = strip(raw);
    if (s.empty() || s == "null" || s == "~") return nullptr;
    if (s == "true") return true;
    if (s == "false") return false;
    if ((s.front() == '"' && s.back() == '"' && s.size() >= 2) ||
        (s.front() == '\'' && s.back() == '\'' && s.size() >= 2))
        return s.substr(1, s.size() - 2);
    // Integer?
    {
        char* end = nullptr;
        const long long v = std::strtoll(s.c_str(), &end, 10);
        if (end && *end == '\0') return v;
    }
    // Float?
    {
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (end && *end == '\0') return v;
    }
    return s;
}

json parse_value(const std::string& raw, int line_no) {
    std::string s = strip(raw);
    if (!s.empty() && s.front() == '[') {
        if (s.back() != ']')
            throw std::runtime_error("yaml line " + std::to_string(line_no) +
                                     ": unterminated flow list");
        json arr = json::array();
        std::string inner = s.substr(1, s.size() - 2);
        std::string item;
        std::istringstream is(inner);
        while (std::getline(is, item, ',')) {
            if (strip(item).empty()) continue;
            arr.push_back(parse_scalar(item));
        }
        return arr;
    }
    return parse_scalar(s);
}

std::string strip_comment(const std::string& line) {
    bool in_sq = false, in_dq = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (c == '\'' && !in_dq) in_sq = !in_sq;
        else if (c == '"' && !in_sq) in_dq = !in_dq;
        else if (c == '#' && !in_sq && !in_dq) return line.substr(0, i);
    }
    return line;
}

}  // namespace

json parse_yaml(const std::string& text) {
    json root = json::object();
    // Stack of (indent, node) for the current map nesting.
    std::vector<std::pair<int, json*>> stack{{-1, &root}};

    std::istringstream is(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        const std::string line = strip_comment(raw);
        if (strip(line).empty()) continue;
        if (line.find('\t') != std::string::npos)
            throw std::runtime_error("yaml line " + std::to_string(line_no) +
                                     ": tabs are not allowed for indentation");
        const int indent = int(line.find_first_not_of(' '));
        const std::string body = strip(line);
        if (body.rfind("- ", 0) == 0 || body == "-")
            throw std::runtime_error("yaml line " + std::to_string(line_no) +
                                     ": block lists unsupported; use [a, b, c]");
        const size_t colon = body.find(':');
        if (colon == std::string::npos)
            throw std::runtime_error("yaml line " + std::to_string(line_no) + ": expected 'key:'");
        const std::string key = strip(body.substr(0, colon));
        const std::string rest = body.substr(colon + 1);

        while (stack.size() > 1 && indent <= stack.back().first) stack.pop_back();
        json* parent = stack.back().second;
        if (!parent->is_object())
            throw std::runtime_error("yaml line " + std::to_string(line_no) + ": bad nesting");
        if (parent->contains(key))
            throw std::runtime_error("yaml line " + std::to_string(line_no) + ": duplicate key '" +
                                     key + "'");
        if (strip(rest).empty()) {
            (*parent)[key] = json::object();
            stack.push_back({indent, &(*parent)[key]});
        } else {
            (*parent)[key] = parse_value(rest, line_no);
        }
    }
    return root;
}

json parse_yaml_file(const std::string& path) { return parse_yaml(io::read_file(path)); }

}  // namespace ltree::cfg
