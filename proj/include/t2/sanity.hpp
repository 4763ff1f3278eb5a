#pragma once

#include <cctype>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "t2/csv.hpp"
#include "t2/error.hpp"
#include "t2/tabular.hpp"

namespace t2 {

inline constexpr double kConstraintTolerance = 1e-9;

struct RangeConstraint {
    std::size_t feature = 0;
    double lower = 0.0;
    double upper = 0.0;
};

/// `column` is a feature index, or the schema dimension for the label.
struct CategoricalConstraint {
    std::size_t column = 0;
};

/// Σ w_l·x_l + Σ w_{l,j}·[x_l = C_j] + b ≥ 0
struct LinearClause {
    struct NumericTerm {
        std::size_t feature;
        double weight;
    };
    struct IndicatorTerm {
        std::size_t feature;
        std::size_t category;
        double weight;
    };
    std::vector<NumericTerm> numeric;
    std::vector<IndicatorTerm> indicators;
    double constant = 0.0;

    double evaluate(const Record& r, const Schema& schema) const {
        double v = constant;
        for (const auto& t : numeric) v += t.weight * r.number(t.feature);
        for (const auto& t : indicators)
            if (r.text(t.feature) == schema.feature(t.feature).categories()[t.category]) v += t.weight;
        return v;
    }
};

/// A disjunction: satisfied when any clause holds.
struct RelationalGroup {
    std::string text;
    std::vector<LinearClause> clauses;
};

struct ConstraintSet {
    Schema schema;
    std::vector<RangeConstraint> ranges;
    std::vector<CategoricalConstraint> categoricals;
    std::vector<RelationalGroup> relational;
};

struct Violation {
    enum class Kind { type, range, categorical, relational };
    std::size_t record = 0;
    Kind kind = Kind::range;
    std::string explanation;

    static const char* kind_name(Kind k) {
        switch (k) {
            case Kind::type: return "type";
            case Kind::range: return "range";
            case Kind::categorical: return "categorical";
            case Kind::relational: return "relational";
        }
        return "unknown";
    }
};

inline Json violation_to_json(const Violation& v) {
    return {{"record", v.record}, {"kind", Violation::kind_name(v.kind)}, {"explanation", v.explanation}};
}

namespace rule_detail {

enum class Tok { number, ident, text, plus, minus, star, eqeq, ge, le, orop, end };

struct Token {
    Tok kind;
    std::string text;
    double number = 0.0;
};

inline std::vector<Token> tokenize(std::string_view s, const std::string& rule) {
    std::vector<Token> out;
    std::size_t i = 0;
    auto fail = [&](const std::string& msg) { throw ConfigError("rule '" + rule + "': " + msg); };
    while (i < s.size()) {
        const char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
            std::size_t j = i;
            while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.' || s[j] == 'e' || s[j] == 'E' ||
                                    ((s[j] == '-' || s[j] == '+') && j > i && (s[j - 1] == 'e' || s[j - 1] == 'E'))))
                ++j;
            auto v = parse_number(s.substr(i, j - i));
            if (!v) fail("bad number '" + std::string(s.substr(i, j - i)) + "'");
            out.push_back({Tok::number, std::string(s.substr(i, j - i)), *v});
            i = j;
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' || s[j] == '.')) ++j;
            std::string word(s.substr(i, j - i));
            out.push_back({word == "or" ? Tok::orop : Tok::ident, word});
            i = j;
        } else if (c == '"' || c == '\'') {
            const auto j = s.find(c, i + 1);
            if (j == std::string_view::npos) fail("unterminated quote");
            out.push_back({Tok::text, std::string(s.substr(i + 1, j - i - 1))});
            i = j + 1;
        } else if (s.substr(i, 2) == "==") {
            out.push_back({Tok::eqeq, "=="}), i += 2;
        } else if (s.substr(i, 2) == ">=") {
            out.push_back({Tok::ge, ">="}), i += 2;
        } else if (s.substr(i, 2) == "<=") {
            out.push_back({Tok::le, "<="}), i += 2;
        } else if (s.substr(i, 2) == "||") {
            out.push_back({Tok::orop, "||"}), i += 2;
        } else if (c == '+') {
            out.push_back({Tok::plus, "+"}), ++i;
        } else if (c == '-') {
            out.push_back({Tok::minus, "-"}), ++i;
        } else if (c == '*') {
            out.push_back({Tok::star, "*"}), ++i;
        } else {
            fail(std::string("unexpected character '") + c + "'");
        }
    }
    out.push_back({Tok::end, ""});
    return out;
}

class Parser {
public:
    Parser(const Schema& schema, std::string rule) : schema_(schema), rule_(std::move(rule)), toks_(tokenize(rule_, rule_)) {}

    RelationalGroup parse() {
        RelationalGroup g{rule_, {}};
        g.clauses.push_back(clause());
        while (peek().kind == Tok::orop) {
            ++pos_;
            g.clauses.push_back(clause());
        }
        if (peek().kind != Tok::end) fail("unexpected '" + peek().text + "'");
        return g;
    }

private:
    const Token& peek() const { return toks_[pos_]; }
    [[noreturn]] void fail(const std::string& msg) const { throw ConfigError("rule '" + rule_ + "': " + msg); }

    LinearClause clause() {
        LinearClause lhs;
        expression(lhs, 1.0);
        const Tok cmp = peek().kind;
        // a bare indicator such as "sex==Female" means [sex==Female] >= 1
        if ((cmp == Tok::orop || cmp == Tok::end) && lhs.numeric.empty() && lhs.constant == 0.0 &&
            lhs.indicators.size() == 1 && lhs.indicators[0].weight == 1.0) {
            lhs.constant = -1.0;
            return lhs;
        }
        if (cmp != Tok::ge && cmp != Tok::le) fail("expected '>=' or '<='");
        ++pos_;
        // lhs >= rhs  ⇔  lhs - rhs >= 0 ;  lhs <= rhs  ⇔  rhs - lhs >= 0
        const double sign = cmp == Tok::ge ? 1.0 : -1.0;
        LinearClause out;
        for (auto& t : lhs.numeric) out.numeric.push_back({t.feature, sign * t.weight});
        for (auto& t : lhs.indicators) out.indicators.push_back({t.feature, t.category, sign * t.weight});
        out.constant = sign * lhs.constant;
        expression(out, -sign);
        return out;
    }

    void expression(LinearClause& acc, double sign) {
        double s = 1.0;
        if (peek().kind == Tok::minus || peek().kind == Tok::plus) s = peek().kind == Tok::minus ? -1.0 : 1.0, ++pos_;
        term(acc, sign * s);
        while (peek().kind == Tok::plus || peek().kind == Tok::minus) {
            s = peek().kind == Tok::minus ? -1.0 : 1.0;
            ++pos_;
            term(acc, sign * s);
        }
    }

    void term(LinearClause& acc, double sign) {
        double coef = 1.0;
        if (peek().kind == Tok::number) {
            coef = peek().number;
            ++pos_;
            if (peek().kind != Tok::star) {
                acc.constant += sign * coef;
                return;
            }
            ++pos_;
        }
        if (peek().kind != Tok::ident) fail("expected a feature name");
        const std::string name = peek().text;
        ++pos_;
        if (peek().kind == Tok::star) {
            ++pos_;
            if (peek().kind != Tok::number) fail("expected a number after '*'");
            coef *= peek().number;
            ++pos_;
        }
        auto idx = schema_.index_of(name);
        if (!idx) fail("unknown feature '" + name + "'");
        const auto& f = schema_.feature(*idx);
        if (peek().kind == Tok::eqeq) {
            ++pos_;
            const Token& cat = peek();
            if (cat.kind != Tok::ident && cat.kind != Tok::text && cat.kind != Tok::number) fail("expected a category");
            ++pos_;
            if (!f.is_categorical()) fail("'" + name + "' is not categorical");
            auto ci = f.category_index(cat.text);
            if (!ci) fail("'" + cat.text + "' is not a category of '" + name + "'");
            acc.indicators.push_back({*idx, *ci, sign * coef});
            return;
        }
        if (!f.is_continuous()) fail("categorical feature '" + name + "' needs an indicator '" + name + "==<category>'");
        acc.numeric.push_back({*idx, sign * coef});
    }

    const Schema& schema_;
    std::string rule_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

}  // namespace rule_detail

/// Parses one relational rule, e.g. "priors_count - juv_fel_count >= 0" or
/// "bmi >= 18 || sex==Female". Clauses are linear in continuous features and
/// `feature==category` indicators; `||` / `or` joins alternatives.
inline RelationalGroup parse_rule(const Schema& schema, const std::string& rule) {
    return rule_detail::Parser(schema, rule).parse();
}

/// Range and vocabulary constraints come from the schema; relational ones
/// from rule strings.
inline ConstraintSet compile_constraints(const Schema& schema, const std::vector<std::string>& rules) {
    ConstraintSet cs;
    cs.schema = schema;
    for (std::size_t j = 0; j < schema.dimension(); ++j) {
        const auto& f = schema.feature(j);
        if (f.is_continuous())
            cs.ranges.push_back({j, f.bounds().lower, f.bounds().upper});
        else
            cs.categoricals.push_back({j});
    }
    cs.categoricals.push_back({schema.dimension()});
    for (const auto& r : rules) cs.relational.push_back(parse_rule(schema, r));
    return cs;
}

/// All violations of `r`; empty means the record passes.
inline std::vector<Violation> check_record(const Record& r, const ConstraintSet& cs, std::size_t index = 0) {
    const Schema& schema = cs.schema;
    std::vector<Violation> out;
    if (r.values.size() != schema.dimension()) {
        out.push_back({index, Violation::Kind::type, "expected " + std::to_string(schema.dimension()) + " cells"});
        return out;
    }
    for (std::size_t j = 0; j < schema.dimension(); ++j) {
        const bool want_number = schema.feature(j).is_continuous();
        if (want_number != std::holds_alternative<double>(r.values[j])) {
            out.push_back({index, Violation::Kind::type, "column '" + schema.feature(j).name + "' has the wrong cell type"});
            return out;
        }
    }
    for (const auto& rc : cs.ranges) {
        const double v = r.number(rc.feature);
        if (!std::isfinite(v) || v < rc.lower - kConstraintTolerance || v > rc.upper + kConstraintTolerance)
            out.push_back({index, Violation::Kind::range,
                           schema.feature(rc.feature).name + "=" + format_number(v) + " outside [" +
                               format_number(rc.lower) + ", " + format_number(rc.upper) + "]"});
    }
    for (const auto& cc : cs.categoricals) {
        const bool is_label = cc.column == schema.dimension();
        const FeatureSpec& f = is_label ? schema.label() : schema.feature(cc.column);
        const std::string& v = is_label ? r.label : r.text(cc.column);
        if (!f.category_index(v))
            out.push_back({index, Violation::Kind::categorical, f.name + "='" + v + "' is not an allowed category"});
    }
    for (const auto& g : cs.relational) {
        bool any = false;
        for (const auto& c : g.clauses) {
            if (c.evaluate(r, schema) >= -kConstraintTolerance) {
                any = true;
                break;
            }
        }
        if (!any) out.push_back({index, Violation::Kind::relational, "violates '" + g.text + "'"});
    }
    return out;
}

struct TrimResult {
    DataBatch kept;
    std::vector<Violation> violations;
    std::size_t rejected = 0;
};

/// Drops every record with at least one violation; order is preserved.
inline TrimResult trim_batch(const DataBatch& batch, const ConstraintSet& cs) {
    TrimResult out;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        auto v = check_record(batch.records[i], cs, i);
        if (v.empty()) {
            out.kept.push_back(batch.records[i], batch.provenance[i]);
        } else {
            ++out.rejected;
            out.violations.insert(out.violations.end(), v.begin(), v.end());
        }
    }
    return out;
}

}  // namespace t2
