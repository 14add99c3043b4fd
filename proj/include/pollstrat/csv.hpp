#pragma once

// Minimal RFC 4180 reader/writer plus locale-independent number and
// timestamp conversions used by the file formats.

#include <pollstrat/error.hpp>
#include <pollstrat/model.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace pollstrat::csv {

struct Record {
    std::vector<std::string> fields;
    std::size_t line = 0;  // 1-based line where the record starts
};

/// Streaming reader. Quoted fields may contain commas, doubled quotes and
/// line breaks; both LF and CRLF terminators are accepted.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    /// Returns false at end of input. Throws SchemaMismatch on an
    /// unterminated quoted field.
    bool next(Record& rec)
    {
        rec.fields.clear();
        if (!in_.good() || in_.peek() == std::char_traits<char>::eof()) {
            return false;
        }
        rec.line = line_ + 1;
        std::string field;
        bool quoted = false;
        bool field_was_quoted = false;
        int ch;
        while ((ch = in_.get()) != std::char_traits<char>::eof()) {
            char const c = static_cast<char>(ch);
            if (quoted) {
                if (c == '"') {
                    if (in_.peek() == '"') {
                        in_.get();
                        field.push_back('"');
                    } else {
                        quoted = false;
                    }
                } else {
                    if (c == '\n') {
                        ++line_;
                    }
                    field.push_back(c);
                }
                continue;
            }
            if (c == '"' && field.empty() && !field_was_quoted) {
                quoted = true;
                field_was_quoted = true;
            } else if (c == ',') {
                rec.fields.push_back(std::move(field));
                field.clear();
                field_was_quoted = false;
            } else if (c == '\r' && in_.peek() == '\n') {
                continue;
            } else if (c == '\n') {
                ++line_;
                rec.fields.push_back(std::move(field));
                return true;
            } else {
                field.push_back(c);
            }
        }
        if (quoted) {
            throw Error(ErrorCode::SchemaMismatch,
                        "unterminated quoted field starting on line " + std::to_string(rec.line));
        }
        ++line_;
        rec.fields.push_back(std::move(field));
        return true;
    }

private:
    std::istream& in_;
    std::size_t line_ = 0;
};

inline std::string quote(std::string_view field)
{
    bool const needs = field.find_first_of(",\"\r\n") != std::string_view::npos
                       || (!field.empty() && (field.front() == ' ' || field.back() == ' '));
    if (!needs) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

inline void write_row(std::ostream& out, std::vector<std::string> const& fields)
{
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i != 0) {
            out << ',';
        }
        out << quote(fields[i]);
    }
    out << '\n';
}

//---------------------------------------------------------------------------//

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) {
        s.remove_suffix(1);
    }
    return s;
}

/// Exact non-negative integer (digits only).
inline std::optional<std::uint64_t> parse_count(std::string_view s)
{
    s = trim(s);
    if (s.empty()) {
        return std::nullopt;
    }
    std::uint64_t v = 0;
    auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

/// C-locale decimal; rejects trailing garbage and non-finite values.
inline std::optional<double> parse_real(std::string_view s)
{
    s = trim(s);
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    if (s.empty()) {
        return std::nullopt;
    }
    double v = 0.0;
    auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

/// Shortest decimal that parses back to the same double.
inline std::string format_real(double v)
{
    char buf[64];
    auto const [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

//---------------------------------------------------------------------------//

/// Parses "YYYY-MM-DDTHH:MM:SS" followed by "Z" or "+00:00" (a space may
/// replace the 'T'; fractional seconds are truncated). Only UTC is accepted.
inline std::optional<Timestamp> parse_timestamp(std::string_view s)
{
    using namespace std::chrono;
    s = trim(s);
    auto num = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
        if (pos + len > s.size()) {
            return std::nullopt;
        }
        int v = 0;
        for (std::size_t i = pos; i < pos + len; ++i) {
            if (s[i] < '0' || s[i] > '9') {
                return std::nullopt;
            }
            v = v * 10 + (s[i] - '0');
        }
        return v;
    };
    if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':'
        || s[16] != ':') {
        return std::nullopt;
    }
    auto const y = num(0, 4);
    auto const mo = num(5, 2);
    auto const d = num(8, 2);
    auto const h = num(11, 2);
    auto const mi = num(14, 2);
    auto const se = num(17, 2);
    if (!y || !mo || !d || !h || !mi || !se || *h > 23 || *mi > 59 || *se > 59) {
        return std::nullopt;
    }
    std::size_t pos = 19;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
            ++pos;
        }
    }
    auto const zone = s.substr(pos);
    if (zone != "Z" && zone != "+00:00" && zone != "+0000") {
        return std::nullopt;
    }
    year_month_day const ymd{year{*y}, month{static_cast<unsigned>(*mo)}, day{static_cast<unsigned>(*d)}};
    if (!ymd.ok()) {
        return std::nullopt;
    }
    return sys_days{ymd} + hours{*h} + minutes{*mi} + seconds{*se};
}

inline std::string format_timestamp(Timestamp t)
{
    using namespace std::chrono;
    auto const days = floor<std::chrono::days>(t);
    year_month_day const ymd{days};
    hh_mm_ss const hms{t - days};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

}  // namespace pollstrat::csv
