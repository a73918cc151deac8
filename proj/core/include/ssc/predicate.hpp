// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ssc {

enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge };

/// `var OP literal`. Both sides compare numerically when both parse as
/// decimals, lexicographically otherwise. No boolean combinators.
struct Predicate {
    std::string variable;
    CompareOp op = CompareOp::Eq;
    std::string literal;

    /// nullopt on syntax error.
    static std::optional<Predicate> parse(std::string_view text);
    bool evaluate(std::string_view value) const;
};

/// Strict decimal: optional sign, digits, optional fraction.
std::optional<double> parse_decimal(std::string_view s);

/// Replaces each `${name}`. Returns nullopt and sets `missing` when a name has
/// no value.
std::optional<std::string> render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars,
                                           std::string* missing = nullptr);

/// Names referenced by `${...}` in a template.
std::vector<std::string> template_variables(std::string_view tmpl);

}  // namespace ssc
