#ifndef FEDIDS_LOGFMT_HPP
#define FEDIDS_LOGFMT_HPP

// Text grammar of the per-device logs:
//
//   entry   := segment ("," segment)* ["," status]
//   segment := node ">" node "," timestamp ["," timestamp]
//   status  := "S:" digit+
//
// A single optional space is accepted on either side of ">" and after ",".
// Serialization is canonical: no blanks outside the timestamps.

#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fedids/error.hpp"
#include "fedids/netmodel.hpp"
#include "fedids/timestamp.hpp"

namespace fedids {

enum class EntryKind { Edge, Router, Coordinator };

inline std::string to_string(EntryKind k) {
    switch (k) {
    case EntryKind::Edge: return "edge";
    case EntryKind::Router: return "router";
    case EntryKind::Coordinator: return "coordinator";
    }
    return "?";
}

struct Segment {
    NodeId from;
    NodeId to;
    Timestamp sent_at;
    std::optional<Timestamp> received_at;

    bool complete() const { return received_at.has_value(); }
    bool operator==(const Segment&) const = default;
};

struct LogEntry {
    EntryKind kind = EntryKind::Edge;
    std::vector<Segment> segments;
    std::optional<int> status;

    NodeId origin() const { return segments.front().from; }
    Timestamp first_sent() const { return segments.front().sent_at; }
    bool operator==(const LogEntry&) const = default;
};

namespace detail {

class Cursor {
public:
    explicit Cursor(std::string_view s) : s_(s) {}

    std::size_t pos() const { return pos_; }
    bool done() const { return pos_ >= s_.size(); }
    char peek() const { return done() ? '\0' : s_[pos_]; }

    [[noreturn]] void fail(const std::string& why) const { throw ParseError(pos_, why); }

    void skip_space() {
        if (peek() == ' ') ++pos_;
    }

    void expect(char c, const char* what) {
        if (peek() != c) fail(std::string("expected ") + what);
        ++pos_;
    }

    NodeId node_token() {
        std::size_t start = pos_;
        while (!done() && s_[pos_] != '>' && s_[pos_] != ',' && s_[pos_] != ' ') ++pos_;
        auto tok = s_.substr(start, pos_ - start);
        NodeId n;
        if (!try_parse_node(tok, n)) {
            pos_ = start;
            fail("unknown node '" + std::string(tok) + "'");
        }
        return n;
    }

    Timestamp timestamp() {
        if (s_.size() - pos_ < kTimestampWidth) fail("truncated timestamp");
        auto t = parse_timestamp(s_.substr(pos_, kTimestampWidth));
        if (!t) fail("bad timestamp");
        pos_ += kTimestampWidth;
        return *t;
    }

    int status() {
        expect('S', "status 'S:'");
        expect(':', "':' after 'S'");
        std::size_t start = pos_;
        long long v = 0;
        while (!done() && s_[pos_] >= '0' && s_[pos_] <= '9') {
            v = v * 10 + (s_[pos_] - '0');
            if (pos_ - start >= 9) fail("status code too long");
            ++pos_;
        }
        if (pos_ == start) fail("status code needs digits");
        return static_cast<int>(v);
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
};

} // namespace detail

/// Parses one physical log line. Throws ParseError (never anything else) on
/// malformed input.
inline LogEntry parse_entry(std::string_view line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);
    detail::Cursor cur(line);
    LogEntry e;
    if (cur.done()) cur.fail("empty entry");

    for (;;) {
        Segment seg;
        seg.from = cur.node_token();
        cur.skip_space();
        cur.expect('>', "'>'");
        cur.skip_space();
        seg.to = cur.node_token();
        cur.expect(',', "',' after node pair");
        cur.skip_space();
        seg.sent_at = cur.timestamp();
        if (cur.done()) {
            e.segments.push_back(seg);
            break;
        }
        cur.expect(',', "',' after timestamp");
        cur.skip_space();
        const char c = cur.peek();
        if (c >= '0' && c <= '9') {
            seg.received_at = cur.timestamp();
            e.segments.push_back(seg);
            if (cur.done()) break;
            cur.expect(',', "',' after timestamp");
            cur.skip_space();
        } else {
            e.segments.push_back(seg);
        }
        if (cur.peek() == 'S') {
            e.status = cur.status();
            if (!cur.done()) cur.fail("trailing bytes after status");
            break;
        }
        if (!e.segments.back().complete()) cur.fail("segment after an incomplete segment");
    }

    const auto& segs = e.segments;
    for (std::size_t i = 0; i < segs.size(); ++i) {
        if (segs[i].from == segs[i].to) cur.fail("segment " + std::to_string(i) + " loops onto itself");
        if (i + 1 < segs.size() && segs[i].to != segs[i + 1].from)
            cur.fail("segment " + std::to_string(i + 1) + " does not continue the path");
        if (segs[i].received_at && *segs[i].received_at < segs[i].sent_at)
            cur.fail("segment " + std::to_string(i) + " received before sent");
        if (i + 1 < segs.size()) {
            auto prev = segs[i].received_at.value_or(segs[i].sent_at);
            if (segs[i + 1].sent_at < prev)
                cur.fail("segment " + std::to_string(i + 1) + " sent before previous hop arrived");
        }
    }

    if (segs.back().complete()) {
        e.kind = EntryKind::Coordinator;
        if (!segs.back().to.is_coordinator()) cur.fail("complete path must end at C");
    } else if (segs.size() == 1) {
        e.kind = EntryKind::Edge;
        if (!segs.front().from.is_edge()) cur.fail("single-hop entry must originate at an edge");
        if (!e.status) cur.fail("edge entry needs a status");
    } else {
        e.kind = EntryKind::Router;
        if (!e.status) cur.fail("router entry needs a status");
    }
    return e;
}

inline std::string serialize_entry(const LogEntry& e) {
    std::string out;
    out.reserve(64 * e.segments.size());
    for (std::size_t i = 0; i < e.segments.size(); ++i) {
        const auto& s = e.segments[i];
        if (i) out += ',';
        out += s.from.str();
        out += '>';
        out += s.to.str();
        out += ',';
        out += format_timestamp(s.sent_at);
        if (s.received_at) {
            out += ',';
            out += format_timestamp(*s.received_at);
        }
    }
    if (e.status) {
        out += ",S:";
        out += std::to_string(*e.status);
    }
    return out;
}

/// Drops blanks adjacent to ',' and '>' and at both ends; blanks inside
/// timestamps are untouched. Maps any accepted spelling to canonical bytes.
inline std::string normalize_whitespace(std::string_view line) {
    auto blank = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    std::string out;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (blank(c)) {
            std::size_t j = i;
            while (j < line.size() && blank(line[j])) ++j;
            const bool at_edge = out.empty() || j == line.size();
            const bool near_sep = (!out.empty() && (out.back() == ',' || out.back() == '>')) ||
                                  (j < line.size() && (line[j] == ',' || line[j] == '>'));
            if (!at_edge && !near_sep) out += ' ';
            i = j - 1;
            continue;
        }
        out += c;
    }
    return out;
}

inline double end_to_end_delay_ms(const LogEntry& e) {
    if (e.kind != EntryKind::Coordinator || !e.segments.back().received_at)
        throw IncompleteTrace("end-to-end delay needs a coordinator entry");
    return to_ms(*e.segments.back().received_at - e.segments.front().sent_at);
}

inline double first_hop_delay_ms(const LogEntry& e) {
    if (e.segments.empty() || !e.segments.front().received_at)
        throw IncompleteTrace("first hop was never received");
    return to_ms(*e.segments.front().received_at - e.segments.front().sent_at);
}

inline std::size_t hop_count(const LogEntry& e) { return e.segments.size(); }

/// Parses a newline-delimited log document; blank lines are skipped. Errors
/// carry the 1-based line number in their message.
inline std::vector<LogEntry> parse_log(std::string_view text) {
    std::vector<LogEntry> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            out.push_back(parse_entry(line));
        } catch (const ParseError& err) {
            throw ParseError(err.offset(), "line " + std::to_string(line_no) + ": " + err.reason());
        }
    }
    return out;
}

inline std::string serialize_log(const std::vector<LogEntry>& entries) {
    std::string out;
    for (const auto& e : entries) {
        out += serialize_entry(e);
        out += '\n';
    }
    return out;
}

} // namespace fedids

#endif // FEDIDS_LOGFMT_HPP
