#include <cctype>
#include <charconv>

#include "fdtd/error.hpp"
#include "fdtd/schedule.hpp"

namespace fdtd::sched {

namespace {

struct Token {
    std::string text;
    int column;
};

std::vector<Token> tokenize(std::string_view line) {
    std::vector<Token> out;
    std::size_t n = 0;
    while (n < line.size()) {
        const char c = line[n];
        if (c == '#') break;
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++n;
            continue;
        }
        if (c == ',' || c == '=') {
            out.push_back({std::string(1, c), static_cast<int>(n) + 1});
            ++n;
            continue;
        }
        const std::size_t start = n;
        while (n < line.size() && !std::isspace(static_cast<unsigned char>(line[n])) && line[n] != ',' &&
               line[n] != '=' && line[n] != '#')
            ++n;
        out.push_back({std::string(line.substr(start, n - start)), static_cast<int>(start) + 1});
    }
    return out;
}

class LineParser {
public:
    LineParser(std::vector<Token> toks, int line, int directive)
        : toks_(std::move(toks)), line_(line), directive_(directive) {}

    [[noreturn]] void fail(int column, const std::string& msg) const {
        throw ScriptError("line " + std::to_string(line_) + ":" + std::to_string(column) + ": " + msg, directive_);
    }

    int column() const { return pos_ < toks_.size() ? toks_[pos_].column : end_column(); }
    int end_column() const {
        return toks_.empty() ? 1 : toks_.back().column + static_cast<int>(toks_.back().text.size());
    }
    bool done() const { return pos_ >= toks_.size(); }
    const std::string& peek() const {
        static const std::string empty;
        return done() ? empty : toks_[pos_].text;
    }

    std::string handle(const char* what) {
        if (done()) fail(column(), std::string("expected ") + what + " handle");
        const auto& t = toks_[pos_];
        if (t.text.size() < 2 || t.text[0] != '%') fail(t.column, std::string("expected ") + what + " handle, got '" + t.text + "'");
        ++pos_;
        return t.text.substr(1);
    }

    void expect(const char* s) {
        if (done() || toks_[pos_].text != s) fail(column(), std::string("expected '") + s + "'");
        ++pos_;
    }

    std::string word() {
        if (done()) fail(column(), "unexpected end of line");
        return toks_[pos_++].text;
    }

    Index integer(const char* what) {
        const int col = column();
        const std::string w = word();
        Index v = 0;
        const auto r = std::from_chars(w.data(), w.data() + w.size(), v);
        if (r.ec != std::errc{} || r.ptr != w.data() + w.size()) fail(col, std::string(what) + " must be an integer, got '" + w + "'");
        return v;
    }

    void finish() {
        if (!done()) fail(column(), "unexpected '" + toks_[pos_].text + "'");
    }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    int line_, directive_;
};

int parse_axis(LineParser& p) {
    const int col = p.column();
    const std::string w = p.word();
    if (w == "i" || w == "0") return 0;
    if (w == "j" || w == "1") return 1;
    if (w == "k" || w == "2") return 2;
    p.fail(col, "axis must be i, j or k, got '" + w + "'");
}

Directive parse_line(const std::vector<Token>& toks, int line, int index) {
    LineParser p(toks, line, index);
    Directive d;
    d.loc = {line, toks.front().column};
    std::vector<std::string> results;
    if (!p.peek().empty() && p.peek()[0] == '%') {
        results.push_back(p.handle("result"));
        while (p.peek() == ",") {
            p.expect(",");
            results.push_back(p.handle("result"));
        }
        p.expect("=");
    }
    const int kw_col = p.column();
    const std::string kw = p.word();
    auto want_results = [&](std::size_t n) {
        if (results.size() != n)
            p.fail(d.loc.column, "'" + kw + "' defines " + std::to_string(n) + " handle(s), got " + std::to_string(results.size()));
    };
    if (kw == "tile") {
        want_results(2);
        TileDirective t;
        t.op_result = results[0];
        t.loop_result = results[1];
        t.op_ref = p.handle("op");
        bool have_size = false;
        while (!p.done()) {
            const int col = p.column();
            const std::string key = p.word();
            p.expect("=");
            if (key == "axis") {
                t.axis = parse_axis(p);
            } else if (key == "size") {
                const int vcol = p.column();
                t.size = p.integer("size");
                if (t.size < 1) p.fail(vcol, "tile size must be >= 1");
                have_size = true;
            } else {
                p.fail(col, "unknown tile option '" + key + "'");
            }
        }
        if (!have_size) p.fail(p.end_column(), "tile needs size=<n>");
        d.body = t;
    } else if (kw == "fuse") {
        want_results(1);
        FuseDirective f;
        f.result = results[0];
        f.a = p.handle("loop");
        f.b = p.handle("loop");
        p.finish();
        d.body = f;
    } else if (kw == "plan-inplace") {
        want_results(0);
        p.finish();
        d.body = PlanDirective{};
    } else if (kw == "vectorize") {
        want_results(0);
        VectorizeDirective v;
        v.loop = p.handle("loop");
        const int col = p.column();
        const std::string key = p.word();
        if (key == "scalable") {
            v.scalable = true;
        } else if (key == "width") {
            p.expect("=");
            const int vcol = p.column();
            const Index w = p.integer("width");
            if (w < 1 || w > 64 || (w & (w - 1)) != 0) p.fail(vcol, "width must be a power of two in [1,64]");
            v.width = static_cast<int>(w);
        } else {
            p.fail(col, "expected width=<n> or scalable");
        }
        p.finish();
        d.body = v;
    } else {
        p.fail(kw_col, "unknown directive '" + kw + "'");
    }
    return d;
}

} // namespace

TransformScript parse_script(std::string_view text) {
    TransformScript s;
    int line = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line;
        auto toks = tokenize(text.substr(start, end - start));
        if (!toks.empty()) s.directives.push_back(parse_line(toks, line, static_cast<int>(s.directives.size())));
        start = end + 1;
    }
    return s;
}

std::string to_text(const TransformScript& script) {
    static constexpr const char* axes[] = {"i", "j", "k"};
    std::string out;
    for (const auto& d : script.directives) {
        if (const auto* t = std::get_if<TileDirective>(&d.body)) {
            out += "%" + t->op_result + ", %" + t->loop_result + " = tile %" + t->op_ref + " axis=" + axes[t->axis] +
                   " size=" + std::to_string(t->size);
        } else if (const auto* f = std::get_if<FuseDirective>(&d.body)) {
            out += "%" + f->result + " = fuse %" + f->a + " %" + f->b;
        } else if (std::holds_alternative<PlanDirective>(d.body)) {
            out += "plan-inplace";
        } else {
            const auto& v = std::get<VectorizeDirective>(d.body);
            out += "vectorize %" + v.loop + (v.scalable ? std::string(" scalable") : " width=" + std::to_string(v.width));
        }
        out += '\n';
    }
    return out;
}

ScheduledProgram apply_script(const ir::StepProgram& program, const TransformScript& script) {
    Scheduler s(program);
    std::map<std::string, Handle> names;
    std::map<std::string, int> consumed_at;
    for (const auto& op : program.ops) names[ir::op_name(op)] = s.op_handle(ir::op_id(op));
    bool planned = false;

    for (std::size_t n = 0; n < script.directives.size(); ++n) {
        const auto& d = script.directives[n];
        const int index = static_cast<int>(n);
        const std::string where = "line " + std::to_string(d.loc.line) + ":" + std::to_string(d.loc.column) + ": ";
        auto fail = [&](const std::string& msg) -> void { throw ScriptError(where + msg, index); };
        auto lookup = [&](const std::string& name) {
            const auto it = names.find(name);
            if (it == names.end()) fail("unknown handle %" + name);
            if (!s.live(it->second)) {
                const auto c = consumed_at.find(name);
                fail("dangling handle %" + name +
                     (c != consumed_at.end() ? " (consumed by directive " + std::to_string(c->second) + ")" : ""));
            }
            return it->second;
        };
        auto bind = [&](const std::string& name, Handle h) {
            const auto it = names.find(name);
            if (it != names.end() && s.live(it->second)) fail("handle %" + name + " is already bound");
            names[name] = h;
            consumed_at.erase(name);
        };
        try {
            if (const auto* t = std::get_if<TileDirective>(&d.body)) {
                const Handle op = lookup(t->op_ref);
                auto [h_op, h_loop] = s.tile(op, t->axis, t->size);
                consumed_at[t->op_ref] = index;
                bind(t->op_result, h_op);
                bind(t->loop_result, h_loop);
            } else if (const auto* f = std::get_if<FuseDirective>(&d.body)) {
                const Handle a = lookup(f->a), b = lookup(f->b);
                const Handle h = s.fuse_siblings(a, b);
                consumed_at[f->a] = index;
                consumed_at[f->b] = index;
                bind(f->result, h);
            } else if (std::holds_alternative<PlanDirective>(d.body)) {
                if (planned) fail("plan-inplace may appear only once");
                planned = true;
                s.plan_inplace();
            } else {
                const auto& v = std::get<VectorizeDirective>(d.body);
                if (!planned) fail("vectorize must follow plan-inplace");
                s.vectorize(lookup(v.loop), v.width, v.scalable);
            }
        } catch (const ScriptError& e) {
            if (e.directive() >= 0) throw;
            throw ScriptError(where + e.what(), index);
        }
    }
    return s.finish();
}

} // namespace fdtd::sched
