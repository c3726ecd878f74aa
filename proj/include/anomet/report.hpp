#pragma once

// Plain-text records exchanged between pipeline stages.
//
//   score record:   <scan_id> <impurity_id> <channel> <value, 6 decimals>
//   cluster record: <scan_id> <index> <cores> <members> <wallet> <am> <rank> <decile>
//
// Id lists are comma separated. Lines starting with '#' are comments.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "area.hpp"
#include "error.hpp"

namespace anomet {

inline void check_token(const std::string& s, const char* what) {
    if (s.empty() || s.find_first_of(" \t\r\n,#") != std::string::npos)
        throw InvalidInput(std::string(what) + " '" + s + "' must be non-empty without whitespace, ',' or '#'");
}

inline std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

/// Shortest text that reads back to the same double.
inline std::string format_exact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_scores(std::ostream& os, const std::string& scan_id, const std::string& channel,
                         std::span<const double> values) {
    check_token(scan_id, "scan id");
    check_token(channel, "channel");
    for (std::size_t i = 0; i < values.size(); ++i)
        os << scan_id << ' ' << i << ' ' << channel << ' ' << format_fixed(values[i], 6) << '\n';
}

/// Reads the values of one channel; ids must be dense and in order.
inline std::vector<double> read_scores(std::istream& is, const std::string& scan_id, const std::string& channel) {
    std::vector<double> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string sid, ch, extra;
        std::size_t id = 0;
        double v = 0.0;
        if (!(ls >> sid >> id >> ch >> v) || (ls >> extra))
            throw MalformedRecord("score record line " + std::to_string(lineno) + ": expected 4 fields");
        if (sid != scan_id || ch != channel)
            throw MalformedRecord("score record line " + std::to_string(lineno) + ": expected " + scan_id + "/" +
                                  channel + ", found " + sid + "/" + ch);
        if (id != out.size())
            throw MalformedRecord("score record line " + std::to_string(lineno) + ": impurity ids out of order");
        out.push_back(v);
    }
    return out;
}

inline void save_scores(const std::string& path, const std::string& scan_id, const std::string& channel,
                        std::span<const double> values) {
    std::ofstream os(path);
    if (!os) throw InvalidInput("cannot write " + path);
    write_scores(os, scan_id, channel, values);
    if (!os) throw InvalidInput("write failed: " + path);
}

inline std::vector<double> load_scores(const std::string& path, const std::string& scan_id, const std::string& channel) {
    std::ifstream is(path);
    if (!is) throw InvalidInput("cannot read " + path);
    return read_scores(is, scan_id, channel);
}

struct ClusterRecord {
    std::string scan_id;
    std::size_t index = 0;
    Cluster cluster;
    std::size_t rank = 0;  // 0 until ranked
    int decile = 0;
};

namespace detail {

inline std::string join_ids(const std::vector<int>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(ids[i]);
    }
    return s;
}

inline std::vector<int> split_ids(const std::string& s) {
    std::vector<int> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != tok.size() || v < 0) throw MalformedRecord("bad impurity id list '" + s + "'");
        out.push_back(v);
    }
    if (out.empty()) throw MalformedRecord("empty impurity id list");
    return out;
}

} // namespace detail

inline void write_cluster_records(std::ostream& os, std::span<const ClusterRecord> records) {
    os << "# scan_id cluster cores members wallet am rank decile\n";
    for (const auto& r : records) {
        check_token(r.scan_id, "scan id");
        os << r.scan_id << ' ' << r.index << ' ' << detail::join_ids(r.cluster.cores) << ' '
           << detail::join_ids(r.cluster.members) << ' ' << format_exact(r.cluster.wallet) << ' '
           << format_exact(r.cluster.am) << ' ' << r.rank << ' ' << r.decile << '\n';
    }
}

inline std::vector<ClusterRecord> read_cluster_records(std::istream& is) {
    std::vector<ClusterRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        ClusterRecord r;
        std::string cores, members, extra;
        if (!(ls >> r.scan_id >> r.index >> cores >> members >> r.cluster.wallet >> r.cluster.am >> r.rank >> r.decile) ||
            (ls >> extra))
            throw MalformedRecord("cluster record line " + std::to_string(lineno) + ": expected 8 fields");
        r.cluster.cores = detail::split_ids(cores);
        r.cluster.members = detail::split_ids(members);
        out.push_back(std::move(r));
    }
    return out;
}

inline void save_cluster_records(const std::string& path, std::span<const ClusterRecord> records) {
    std::ofstream os(path);
    if (!os) throw InvalidInput("cannot write " + path);
    write_cluster_records(os, records);
    if (!os) throw InvalidInput("write failed: " + path);
}

inline std::vector<ClusterRecord> load_cluster_records(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InvalidInput("cannot read " + path);
    return read_cluster_records(is);
}

/// One line per event, fixed 6-decimal values; used for trace fixtures.
inline std::string format_trace(std::span<const TraceEvent> trace) {
    std::ostringstream os;
    for (const auto& e : trace) {
        os << "pass " << e.pass << " cluster " << e.cluster << ' ';
        switch (e.kind) {
            case TraceEvent::Kind::outbid:
                os << "outbid o=" << e.o << " price=" << format_fixed(e.price, 6) << " wallet=" << format_fixed(e.wallet_before, 6)
                   << " bid=" << format_fixed(e.bid, 6);
                break;
            case TraceEvent::Kind::merge:
                os << "merge i=" << e.i << " o=" << e.o << " price=" << format_fixed(e.price, 6) << " wallet "
                   << format_fixed(e.wallet_before, 6) << " -> " << format_fixed(e.wallet_after, 6) << " absorbed "
                   << e.absorbed;
                break;
            case TraceEvent::Kind::purchase:
                os << "purchase i=" << e.i << " o=" << e.o << " price=" << format_fixed(e.price, 6) << " wallet "
                   << format_fixed(e.wallet_before, 6) << " -> " << format_fixed(e.wallet_after, 6);
                break;
            case TraceEvent::Kind::insufficient:
                os << "insufficient i=" << e.i << " o=" << e.o << " price=" << format_fixed(e.price, 6)
                   << " wallet=" << format_fixed(e.wallet_before, 6);
                break;
            case TraceEvent::Kind::no_candidate:
                os << "pass-turn wallet=" << format_fixed(e.wallet_before, 6);
                break;
        }
        os << '\n';
    }
    return os.str();
}

} // namespace anomet
