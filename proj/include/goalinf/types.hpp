#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace goalinf {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : Error {
    ParseError(const std::string& msg, int line, int col)
        : Error(msg + " (line " + std::to_string(line) + ", col " + std::to_string(col) + ")"),
          line(line), col(col) {}
    int line = 0;
    int col = 0;
};

struct ValidationError : Error {
    using Error::Error;
};

struct IllegalActionError : Error {
    using Error::Error;
};

struct UnreachableGoalError : Error {
    using Error::Error;
};

// Raised by the external LM scorer on transport/auth/protocol failures.
struct BackendError : Error {
    BackendError(const std::string& msg, int status = 0, double retry_after = -1.0)
        : Error(msg), status(status), retry_after(retry_after) {}
    int status = 0;          // HTTP status, 0 if no response
    double retry_after = -1; // seconds, -1 if the server gave none
};

enum class Role : uint8_t { principal = 0, assistant = 1 };

inline Role other(Role r) { return r == Role::principal ? Role::assistant : Role::principal; }

inline const char* to_string(Role r) { return r == Role::principal ? "principal" : "assistant"; }

enum class Color : uint8_t { red = 0, green, blue, yellow, orange, purple, cyan, magenta };

inline const char* to_string(Color c) {
    switch (c) {
        case Color::red: return "red";
        case Color::green: return "green";
        case Color::blue: return "blue";
        case Color::yellow: return "yellow";
        case Color::orange: return "orange";
        case Color::purple: return "purple";
        case Color::cyan: return "cyan";
        case Color::magenta: return "magenta";
    }
    return "?";
}

bool parse_color(const std::string& s, Color& out);

enum class ItemKind : uint8_t { key = 0, door, gem };

inline const char* to_string(ItemKind k) {
    switch (k) {
        case ItemKind::key: return "key";
        case ItemKind::door: return "door";
        case ItemKind::gem: return "gem";
    }
    return "?";
}

struct Cell {
    int x = 0;
    int y = 0;
    friend bool operator==(const Cell& a, const Cell& b) { return a.x == b.x && a.y == b.y; }
    friend bool operator!=(const Cell& a, const Cell& b) { return !(a == b); }
};

inline int manhattan(const Cell& a, const Cell& b) {
    return (a.x > b.x ? a.x - b.x : b.x - a.x) + (a.y > b.y ? a.y - b.y : b.y - a.y);
}

// Action costs are kept in integer units of 0.2 so plan costs stay exact.
using CostUnits = int64_t;
constexpr CostUnits kMoveCostUnits = 5; // 1.0
constexpr CostUnits kWaitCostUnits = 3; // 0.6
constexpr double kCostUnit = 0.2;

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t seed = 14695981039346656037ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace goalinf
