#include "slowfast/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace slowfast {

struct Expression::Node {
    enum class Kind { Constant, Variable, Unary, Binary, Call } kind;
    double value = 0.0;                         // Constant
    int slot = -1;                              // Variable
    char op = 0;                                // Unary/Binary
    std::string func;                           // Call
    std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Node = Expression::Node;

class Parser {
public:
    Parser(const std::string& text, const std::vector<std::string>& vars)
        : text_(text), vars_(vars) {}

    NodePtr parse() {
        NodePtr e = expr();
        skip_ws();
        if (pos_ != text_.size())
            fail("unexpected trailing input");
        return e;
    }

private:
    const std::string& text_;
    const std::vector<std::string>& vars_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& why) const {
        throw std::invalid_argument("expression error at position " +
                                    std::to_string(pos_) + ": " + why +
                                    " in \"" + text_ + "\"");
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace((unsigned char)text_[pos_])) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) { ++pos_; return true; }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            if (accept('+')) lhs = binary('+', lhs, term());
            else if (accept('-')) lhs = binary('-', lhs, term());
            else return lhs;
        }
    }

    NodePtr term() {
        NodePtr lhs = factor();
        for (;;) {
            if (accept('*')) lhs = binary('*', lhs, factor());
            else if (accept('/')) lhs = binary('/', lhs, factor());
            else return lhs;
        }
    }

    NodePtr factor() {
        NodePtr base = unary();
        if (accept('^'))
            return binary('^', base, factor());  // right associative
        return base;
    }

    NodePtr unary() {
        if (accept('-')) {
            auto n = std::make_shared<Node>();
            n->kind = Node::Kind::Unary;
            n->op = '-';
            n->args = {unary()};
            return n;
        }
        return primary();
    }

    NodePtr primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        char c = text_[pos_];
        if (std::isdigit((unsigned char)c) || c == '.') return number();
        if (std::isalpha((unsigned char)c) || c == '_') return identifier();
        if (accept('(')) {
            NodePtr e = expr();
            if (!accept(')')) fail("expected ')'");
            return e;
        }
        fail("unexpected character");
    }

    NodePtr number() {
        const char* begin = text_.c_str() + pos_;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin) fail("bad number");
        pos_ += std::size_t(end - begin);
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::Constant;
        n->value = v;
        return n;
    }

    NodePtr identifier() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum((unsigned char)text_[pos_]) || text_[pos_] == '_'))
            ++pos_;
        std::string name = text_.substr(start, pos_ - start);
        if (peek() == '(') {
            accept('(');
            auto n = std::make_shared<Node>();
            n->kind = Node::Kind::Call;
            n->func = name;
            if (!accept(')')) {
                n->args.push_back(expr());
                while (accept(',')) n->args.push_back(expr());
                if (!accept(')')) fail("expected ')'");
            }
            check_call(*n);
            return n;
        }
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            if (vars_[i] == name) {
                auto n = std::make_shared<Node>();
                n->kind = Node::Kind::Variable;
                n->slot = int(i);
                return n;
            }
        }
        if (name == "pi") {
            auto n = std::make_shared<Node>();
            n->kind = Node::Kind::Constant;
            n->value = M_PI;
            return n;
        }
        fail("unknown identifier '" + name + "'");
    }

    void check_call(const Node& n) const {
        std::size_t want;
        if (n.func == "abs" || n.func == "exp" || n.func == "cos" ||
            n.func == "sin" || n.func == "sqrt")
            want = 1;
        else if (n.func == "min" || n.func == "max")
            want = 2;
        else
            throw std::invalid_argument("unknown function '" + n.func + "'");
        if (n.args.size() != want)
            throw std::invalid_argument("function '" + n.func + "' expects " +
                                        std::to_string(want) + " argument(s)");
    }

    static NodePtr binary(char op, NodePtr a, NodePtr b) {
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::Binary;
        n->op = op;
        n->args = {std::move(a), std::move(b)};
        return n;
    }
};

double eval_node(const Node& n, const std::vector<double>& env) {
    switch (n.kind) {
        case Node::Kind::Constant: return n.value;
        case Node::Kind::Variable: return env[std::size_t(n.slot)];
        case Node::Kind::Unary: return -eval_node(*n.args[0], env);
        case Node::Kind::Binary: {
            double a = eval_node(*n.args[0], env);
            double b = eval_node(*n.args[1], env);
            switch (n.op) {
                case '+': return a + b;
                case '-': return a - b;
                case '*': return a * b;
                case '/': return a / b;
                case '^': return std::pow(a, b);
            }
            return 0.0;
        }
        case Node::Kind::Call: {
            double a = eval_node(*n.args[0], env);
            if (n.func == "abs") return std::fabs(a);
            if (n.func == "exp") return std::exp(a);
            if (n.func == "cos") return std::cos(a);
            if (n.func == "sin") return std::sin(a);
            if (n.func == "sqrt") return std::sqrt(a);
            double b = eval_node(*n.args[1], env);
            if (n.func == "min") return std::min(a, b);
            return std::max(a, b);
        }
    }
    return 0.0;
}

}  // namespace

Expression Expression::compile(const std::string& text,
                               const std::vector<std::string>& variables) {
    Expression e;
    e.vars_ = variables;
    e.root_ = Parser(text, variables).parse();
    return e;
}

double Expression::eval(const std::vector<double>& values) const {
    if (values.size() != vars_.size())
        throw std::invalid_argument("expression: wrong environment size");
    return eval_node(*root_, values);
}

}  // namespace slowfast
