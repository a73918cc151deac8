// SPDX-License-Identifier: Apache-2.0
#include "ssc/predicate.hpp"

#include <cctype>
#include <charconv>
#include <vector>

namespace ssc {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool ident_char(char c, bool first) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || (!first && std::isdigit(static_cast<unsigned char>(c)));
}

}  // namespace

std::optional<double> parse_decimal(std::string_view s) {
    if (s.empty()) return std::nullopt;
    std::size_t i = 0;
    if (s[0] == '+' || s[0] == '-') ++i;
    std::size_t int_digits = 0, frac_digits = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++int_digits;
    if (i < s.size() && s[i] == '.') {
        ++i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i, ++frac_digits;
        if (frac_digits == 0) return std::nullopt;
    }
    if (i != s.size() || int_digits == 0) return std::nullopt;
    const std::string text(s[0] == '+' ? s.substr(1) : s);
    double v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
    return v;
}

std::optional<Predicate> Predicate::parse(std::string_view text) {
    text = trim(text);
    std::size_t i = 0;
    while (i < text.size() && ident_char(text[i], i == 0)) ++i;
    if (i == 0) return std::nullopt;
    Predicate p;
    p.variable = std::string(text.substr(0, i));
    auto rest = trim(text.substr(i));
    static constexpr std::pair<std::string_view, CompareOp> ops[] = {
        {"==", CompareOp::Eq}, {"!=", CompareOp::Ne}, {"<=", CompareOp::Le},
        {">=", CompareOp::Ge}, {"<", CompareOp::Lt},  {">", CompareOp::Gt},
    };
    bool matched = false;
    for (const auto& [tok, op] : ops) {
        if (rest.starts_with(tok)) {
            p.op = op;
            rest.remove_prefix(tok.size());
            matched = true;
            break;
        }
    }
    if (!matched) return std::nullopt;
    rest = trim(rest);
    if (rest.size() >= 2 && rest.front() == '"' && rest.back() == '"') rest = rest.substr(1, rest.size() - 2);
    if (rest.empty()) return std::nullopt;
    p.literal = std::string(rest);
    return p;
}

bool Predicate::evaluate(std::string_view value) const {
    int cmp = 0;
    auto lhs = parse_decimal(value);
    auto rhs = parse_decimal(literal);
    if (lhs && rhs) {
        cmp = *lhs < *rhs ? -1 : (*lhs > *rhs ? 1 : 0);
    } else {
        const auto c = value.compare(literal);
        cmp = c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    switch (op) {
        case CompareOp::Eq: return cmp == 0;
        case CompareOp::Ne: return cmp != 0;
        case CompareOp::Lt: return cmp < 0;
        case CompareOp::Le: return cmp <= 0;
        case CompareOp::Gt: return cmp > 0;
        case CompareOp::Ge: return cmp >= 0;
    }
    return false;
}

std::optional<std::string> render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars,
                                           std::string* missing) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '$' && i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
            const auto close = tmpl.find('}', i + 2);
            if (close != std::string_view::npos) {
                const std::string name(tmpl.substr(i + 2, close - i - 2));
                auto it = vars.find(name);
                if (it == vars.end()) {
                    if (missing) *missing = name;
                    return std::nullopt;
                }
                out += it->second;
                i = close + 1;
                continue;
            }
        }
        out.push_back(tmpl[i++]);
    }
    return out;
}

std::vector<std::string> template_variables(std::string_view tmpl) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while ((i = tmpl.find("${", i)) != std::string_view::npos) {
        const auto close = tmpl.find('}', i + 2);
        if (close == std::string_view::npos) break;
        out.emplace_back(tmpl.substr(i + 2, close - i - 2));
        i = close + 1;
    }
    return out;
}

}  // namespace ssc
