#include "composenet/tasklang.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "composenet/errors.hpp"

namespace composenet {

// --- Formula ---------------------------------------------------------------

Formula Formula::prop(Color c) { return Formula(FormulaKind::Prop, c, {}); }
Formula Formula::negate(Formula f) {
  std::vector<Formula> kids;
  kids.push_back(std::move(f));
  return Formula(FormulaKind::Not, Color::Red, std::move(kids));
}
Formula Formula::conj(Formula a, Formula b) {
  std::vector<Formula> kids;
  kids.push_back(std::move(a));
  kids.push_back(std::move(b));
  return Formula(FormulaKind::And, Color::Red, std::move(kids));
}
Formula Formula::disj(Formula a, Formula b) {
  std::vector<Formula> kids;
  kids.push_back(std::move(a));
  kids.push_back(std::move(b));
  return Formula(FormulaKind::Or, Color::Red, std::move(kids));
}
Formula Formula::until(Formula a, Formula b) {
  std::vector<Formula> kids;
  kids.push_back(std::move(a));
  kids.push_back(std::move(b));
  return Formula(FormulaKind::Until, Color::Red, std::move(kids));
}
Formula Formula::eventually(Formula f) {
  std::vector<Formula> kids;
  kids.push_back(std::move(f));
  return Formula(FormulaKind::Eventually, Color::Red, std::move(kids));
}
Formula Formula::always(Formula f) {
  std::vector<Formula> kids;
  kids.push_back(std::move(f));
  return Formula(FormulaKind::Always, Color::Red, std::move(kids));
}

Color Formula::color() const {
  if (kind_ != FormulaKind::Prop) throw UsageError("Formula::color on non-proposition");
  return color_;
}
const Formula& Formula::child() const {
  if (kids_.size() != 1) throw UsageError("Formula::child on non-unary node");
  return kids_[0];
}
const Formula& Formula::left() const {
  if (kids_.size() != 2) throw UsageError("Formula::left on non-binary node");
  return kids_[0];
}
const Formula& Formula::right() const {
  if (kids_.size() != 2) throw UsageError("Formula::right on non-binary node");
  return kids_[1];
}

bool Formula::operator==(const Formula& other) const {
  if (kind_ != other.kind_) return false;
  if (kind_ == FormulaKind::Prop) return color_ == other.color_;
  if (kids_.size() != other.kids_.size()) return false;
  for (size_t i = 0; i < kids_.size(); ++i)
    if (!(kids_[i] == other.kids_[i])) return false;
  return true;
}

namespace {

// Binding strength: Until 1 < Or 2 < And 3 < unary 4 < atom 5.
int precedence(const Formula& f) {
  switch (f.kind()) {
    case FormulaKind::Prop: return 5;
    case FormulaKind::Not:
    case FormulaKind::Eventually:
    case FormulaKind::Always: return 4;
    case FormulaKind::And: return 3;
    case FormulaKind::Or: return 2;
    case FormulaKind::Until: return 1;
  }
  return 0;
}

void print_formula(const Formula& f, std::ostream& os) {
  auto wrap = [&](const Formula& sub, bool parens) {
    if (parens) os << '(';
    print_formula(sub, os);
    if (parens) os << ')';
  };
  switch (f.kind()) {
    case FormulaKind::Prop:
      os << color_letter(f.color());
      break;
    case FormulaKind::Not:
      os << '!';
      wrap(f.child(), precedence(f.child()) < 4);
      break;
    case FormulaKind::Eventually:
    case FormulaKind::Always: {
      os << (f.kind() == FormulaKind::Eventually ? 'F' : 'G');
      if (precedence(f.child()) < 4) {
        wrap(f.child(), true);
      } else {
        os << ' ';
        print_formula(f.child(), os);
      }
      break;
    }
    case FormulaKind::And:
      wrap(f.left(), precedence(f.left()) < 3);
      os << " & ";
      wrap(f.right(), precedence(f.right()) <= 3);
      break;
    case FormulaKind::Or:
      wrap(f.left(), precedence(f.left()) < 2);
      os << " | ";
      wrap(f.right(), precedence(f.right()) <= 2);
      break;
    case FormulaKind::Until:
      wrap(f.left(), precedence(f.left()) <= 1);
      os << " U ";
      wrap(f.right(), precedence(f.right()) < 1);
      break;
  }
}

}  // namespace

std::string Formula::str() const {
  std::ostringstream os;
  print_formula(*this, os);
  return os.str();
}

// --- parser ----------------------------------------------------------------

namespace {

class FormulaParser {
public:
  explicit FormulaParser(const std::string& text) : s_(text) {}

  Formula run() {
    Formula f = parse_until();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return f;
  }

private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("task syntax error at position " + std::to_string(pos_) + ": " + msg);
  }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Formula parse_until() {
    Formula left = parse_or();
    if (eat('U')) return Formula::until(std::move(left), parse_until());
    return left;
  }

  Formula parse_or() {
    Formula f = parse_and();
    while (eat('|')) f = Formula::disj(std::move(f), parse_and());
    return f;
  }

  Formula parse_and() {
    Formula f = parse_unary();
    while (eat('&')) f = Formula::conj(std::move(f), parse_unary());
    return f;
  }

  Formula parse_unary() {
    skip_ws();
    if (eat('!')) return Formula::negate(parse_unary());
    if (eat('F')) return Formula::eventually(parse_unary());
    if (eat('G')) return Formula::always(parse_unary());
    return parse_atom();
  }

  Formula parse_atom() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Formula f = parse_until();
      if (!eat(')')) fail("expected ')'");
      return f;
    }
    if (c == 'r' || c == 'g' || c == 'b') {
      ++pos_;
      return Formula::prop(c == 'r' ? Color::Red : c == 'g' ? Color::Green : Color::Blue);
    }
    if (std::isalpha(static_cast<unsigned char>(c)))
      fail(std::string("unknown atom '") + c + "' (atoms are r, g, b)");
    fail(std::string("unexpected character '") + c + "'");
  }

  const std::string& s_;
  size_t pos_ = 0;
};

}  // namespace

Formula parse_formula(const std::string& text) { return FormulaParser(text).run(); }

// --- compilation -----------------------------------------------------------

const char* to_string(TemplateKind k) {
  switch (k) {
    case TemplateKind::CollectSkill: return "collect_skill";
    case TemplateKind::EvadeSkill: return "evade_skill";
    case TemplateKind::While: return "while";
    case TemplateKind::OrTask: return "or";
    case TemplateKind::AndEvade: return "and";
    case TemplateKind::Then: return "then";
    case TemplateKind::HierAndUntil: return "andwhile";
    case TemplateKind::HierUntilOr: return "orwhile";
  }
  return "?";
}

bool is_hierarchy(TemplateKind k) {
  return k == TemplateKind::HierAndUntil || k == TemplateKind::HierUntilOr;
}

namespace {

bool match_prop(const Formula& f, Color& c) {
  if (f.kind() != FormulaKind::Prop) return false;
  c = f.color();
  return true;
}

bool match_not_prop(const Formula& f, Color& c) {
  return f.kind() == FormulaKind::Not && match_prop(f.child(), c);
}

bool match_f_prop(const Formula& f, Color& c) {
  return f.kind() == FormulaKind::Eventually && match_prop(f.child(), c);
}

bool match_g_not_prop(const Formula& f, Color& c) {
  return f.kind() == FormulaKind::Always && match_not_prop(f.child(), c);
}

[[noreturn]] void unsupported(const Formula& whole, const Formula& offending) {
  throw ConfigError("compile: unsupported formula shape '" + whole.str() +
                    "' (offending subtree '" + offending.str() + "')");
}

void order_canonical(Color& a, Color& b) {
  if (static_cast<int>(a) > static_cast<int>(b)) std::swap(a, b);
}

}  // namespace

TaskSpec compile_task(const Formula& f) {
  TaskSpec spec{f, TemplateKind::CollectSkill, RewardMode::Goal,
                {Role::Bystander, Role::Bystander, Role::Bystander}, {}, {}};

  Color p{}, q{}, s{};
  switch (f.kind()) {
    case FormulaKind::Eventually: {
      const Formula& body = f.child();
      if (match_prop(body, p)) {
        spec.template_kind = TemplateKind::CollectSkill;
        spec.targets = {p};
        break;
      }
      // F(p & F q) up to commutativity of &: collect p first, then q.
      if (body.kind() == FormulaKind::And) {
        const Formula &a = body.left(), &b = body.right();
        if ((match_prop(a, p) && match_f_prop(b, q)) ||
            (match_prop(b, p) && match_f_prop(a, q))) {
          if (p == q) unsupported(f, body);
          spec.template_kind = TemplateKind::Then;
          spec.targets = {p, q};  // temporal order: p before q
          break;
        }
        unsupported(f, body);
      }
      unsupported(f, body);
    }
    case FormulaKind::Always: {
      if (match_not_prop(f.child(), p)) {
        spec.template_kind = TemplateKind::EvadeSkill;
        spec.reward_mode = RewardMode::Survival;
        spec.enemies = {p};
        break;
      }
      unsupported(f, f.child());
    }
    case FormulaKind::Until: {
      const Formula &l = f.left(), &r = f.right();
      if (match_not_prop(l, p)) {
        if (match_prop(r, q)) {
          if (p == q) unsupported(f, r);
          spec.template_kind = TemplateKind::While;
          spec.enemies = {p};
          spec.targets = {q};
          break;
        }
        if (r.kind() == FormulaKind::Or && match_prop(r.left(), s) && match_prop(r.right(), q)) {
          if (s == q || s == p || q == p) unsupported(f, r);
          order_canonical(s, q);
          spec.template_kind = TemplateKind::HierUntilOr;
          spec.enemies = {p};
          spec.targets = {s, q};
          break;
        }
        unsupported(f, r);
      }
      if (l.kind() == FormulaKind::And && match_not_prop(l.left(), p) &&
          match_not_prop(l.right(), q)) {
        if (!match_prop(r, s)) unsupported(f, r);
        if (p == q || p == s || q == s) unsupported(f, l);
        order_canonical(p, q);
        spec.template_kind = TemplateKind::HierAndUntil;
        spec.enemies = {p, q};
        spec.targets = {s};
        break;
      }
      unsupported(f, l);
    }
    case FormulaKind::Or: {
      if (match_f_prop(f.left(), p) && match_f_prop(f.right(), q)) {
        if (p == q) unsupported(f, f.right());
        order_canonical(p, q);
        spec.template_kind = TemplateKind::OrTask;
        spec.targets = {p, q};
        break;
      }
      unsupported(f, f);
    }
    case FormulaKind::And: {
      if (match_g_not_prop(f.left(), p) && match_g_not_prop(f.right(), q)) {
        if (p == q) unsupported(f, f.right());
        order_canonical(p, q);
        spec.template_kind = TemplateKind::AndEvade;
        spec.reward_mode = RewardMode::Survival;
        spec.enemies = {p, q};
        break;
      }
      unsupported(f, f);
    }
    default:
      unsupported(f, f);
  }

  for (Color c : spec.targets) spec.roles[static_cast<size_t>(c)] = Role::Target;
  for (Color c : spec.enemies) spec.roles[static_cast<size_t>(c)] = Role::Enemy;
  return spec;
}

TaskSpec compile_task(const std::string& text) { return compile_task(parse_formula(text)); }

GridConfig TaskSpec::grid_config() const {
  GridConfig cfg;
  cfg.roles = roles;
  return cfg;
}

std::string TaskSpec::slug() const {
  std::string out;
  auto letters = [](const std::vector<Color>& cs) {
    std::string r;
    for (Color c : cs) {
      r += '_';
      r += color_letter(c);
    }
    return r;
  };
  switch (template_kind) {
    case TemplateKind::CollectSkill: return "collect" + letters(targets);
    case TemplateKind::EvadeSkill: return "evade" + letters(enemies);
    case TemplateKind::While: return "while" + letters(enemies) + letters(targets);
    case TemplateKind::OrTask: return "or" + letters(targets);
    case TemplateKind::AndEvade: return "and" + letters(enemies);
    case TemplateKind::Then: return "then" + letters(targets);
    case TemplateKind::HierAndUntil: return "andwhile" + letters(enemies) + letters(targets);
    case TemplateKind::HierUntilOr: return "orwhile" + letters(enemies) + letters(targets);
  }
  return out;
}

// --- monitor ---------------------------------------------------------------

MonitorOutcome monitor_step(MonitorState& m, const TaskSpec& spec, const EventSet& ev,
                            bool truncated) {
  if (m.done) throw UsageError("monitor_step: monitor already done");

  for (Color c : kColors)
    if (ev.collected_of(c)) m.collected_latch[static_cast<size_t>(c)] = true;

  auto latched = [&](Color c) { return m.collected_latch[static_cast<size_t>(c)]; };
  auto enemy_hit = [&] {
    for (Color c : spec.enemies)
      if (ev.colliding_of(c)) return true;
    return false;
  };

  if (spec.reward_mode == RewardMode::Survival) {
    if (enemy_hit()) {
      m.status = MonitorStatus::Failure;
      m.done = true;
      return {0.0f, true};
    }
    if (truncated) {
      m.done = true;
      return {0.01f, true};
    }
    return {0.01f, false};
  }

  // Goal mode. Completion first: until is strict on its left side, so a
  // same-tick collision does not spoil a completed task.
  bool success = false;
  switch (spec.template_kind) {
    case TemplateKind::CollectSkill:
    case TemplateKind::While:
    case TemplateKind::HierAndUntil:
      success = latched(spec.targets[0]);
      break;
    case TemplateKind::OrTask:
    case TemplateKind::HierUntilOr:
      success = latched(spec.targets[0]) || latched(spec.targets[1]);
      break;
    case TemplateKind::Then:
      success = latched(spec.targets[0]) && latched(spec.targets[1]);
      break;
    default:
      throw UsageError("monitor_step: survival template in goal mode");
  }
  if (success) {
    m.status = MonitorStatus::Success;
    m.done = true;
    return {1.0f, true};
  }
  // A then-task becomes unsatisfiable the tick the second-ordered object is
  // collected while the first is still outstanding.
  if (spec.template_kind == TemplateKind::Then && latched(spec.targets[1]) &&
      !latched(spec.targets[0])) {
    m.status = MonitorStatus::Failure;
    m.done = true;
    return {0.0f, true};
  }
  if (enemy_hit()) {
    m.status = MonitorStatus::Failure;
    m.done = true;
    return {-1.0f, true};
  }
  if (truncated) {
    m.done = true;
    return {0.0f, true};
  }
  return {0.0f, false};
}

// --- finite-trace oracle ----------------------------------------------------

const char* to_string(TraceVerdict v) {
  switch (v) {
    case TraceVerdict::Satisfied: return "satisfied";
    case TraceVerdict::Violated: return "violated";
    case TraceVerdict::Undetermined: return "undetermined";
  }
  return "?";
}

namespace {

using V3 = TraceVerdict;

V3 and3(V3 a, V3 b) {
  if (a == V3::Violated || b == V3::Violated) return V3::Violated;
  if (a == V3::Satisfied && b == V3::Satisfied) return V3::Satisfied;
  return V3::Undetermined;
}

V3 or3(V3 a, V3 b) {
  if (a == V3::Satisfied || b == V3::Satisfied) return V3::Satisfied;
  if (a == V3::Violated && b == V3::Violated) return V3::Violated;
  return V3::Undetermined;
}

V3 not3(V3 a) {
  if (a == V3::Satisfied) return V3::Violated;
  if (a == V3::Violated) return V3::Satisfied;
  return V3::Undetermined;
}

struct OracleContext {
  const std::vector<TickProps>& trace;
  std::array<bool, 3> spent{};  // collection events consumed anywhere in the trace

  // Can some valid continuation (no replayed collections) make f true at its
  // first tick or later?
  bool possible(const Formula& f) const {
    switch (f.kind()) {
      case FormulaKind::Prop:
        return !spent[static_cast<size_t>(f.color())];
      case FormulaKind::Not:
        return true;  // a collision-free tick is always choosable
      case FormulaKind::And:
        return possible(f.left()) && possible(f.right());
      case FormulaKind::Or:
        return possible(f.left()) || possible(f.right());
      case FormulaKind::Eventually:
      case FormulaKind::Always:
        return possible(f.child());
      case FormulaKind::Until:
        return possible(f.right());
    }
    return true;
  }

  V3 boundary(const Formula& f) const {
    if (f.kind() == FormulaKind::Always) return V3::Undetermined;
    return possible(f) ? V3::Undetermined : V3::Violated;
  }

  V3 eval(const Formula& f, size_t t) const {
    if (t >= trace.size()) return boundary(f);
    const TickProps& tick = trace[t];
    switch (f.kind()) {
      case FormulaKind::Prop:
        return tick.collected[static_cast<size_t>(f.color())] ? V3::Satisfied : V3::Violated;
      case FormulaKind::Not: {
        const Formula& ch = f.child();
        if (ch.kind() == FormulaKind::Prop) {
          // Negated propositions are collision propositions.
          return tick.collided[static_cast<size_t>(ch.color())] ? V3::Violated : V3::Satisfied;
        }
        return not3(eval(ch, t));
      }
      case FormulaKind::And:
        return and3(eval(f.left(), t), eval(f.right(), t));
      case FormulaKind::Or:
        return or3(eval(f.left(), t), eval(f.right(), t));
      case FormulaKind::Eventually:
        return or3(eval(f.child(), t), eval(f, t + 1));
      case FormulaKind::Always:
        return and3(eval(f.child(), t), eval(f, t + 1));
      case FormulaKind::Until:
        return or3(eval(f.right(), t), and3(eval(f.left(), t), eval(f, t + 1)));
    }
    return V3::Undetermined;
  }
};

}  // namespace

TraceVerdict brute_force_satisfies(const Formula& f, const std::vector<TickProps>& trace) {
  OracleContext ctx{trace, {}};
  for (const TickProps& tick : trace)
    for (int c = 0; c < 3; ++c)
      if (tick.collected[static_cast<size_t>(c)]) ctx.spent[static_cast<size_t>(c)] = true;
  return ctx.eval(f, 0);
}

}  // namespace composenet
