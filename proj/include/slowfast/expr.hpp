#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace slowfast {

// Small arithmetic expression interpreter for config-driven problems.
// Supports + - * / ^, unary minus, abs, exp, cos, sin, sqrt, min, max,
// and named variables bound to slots at compile time.
class Expression {
public:
    static Expression compile(const std::string& text,
                              const std::vector<std::string>& variables);

    double eval(const std::vector<double>& values) const;

    const std::vector<std::string>& variables() const { return vars_; }

    struct Node;  // AST node, defined in the implementation

private:
    std::shared_ptr<const Node> root_;
    std::vector<std::string> vars_;
};

}  // namespace slowfast
