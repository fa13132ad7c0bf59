struct Base {
  int v;
};
struct Derived : Base {
  int w;
};

int main() {
  Derived d;
  d.v = 3;
  d.w = 4;
  try {
    throw d;
  } catch (int) {
    assert(0);
  } catch (Base &b) {
    assert(b.v == 3);
  }
  return 0;
}
// VERDICT: SUCCESSFUL
