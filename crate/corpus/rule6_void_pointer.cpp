struct S {
  int a;
};

int main() {
  S s;
  s.a = 9;
  try {
    throw &s;
  } catch (int *) {
    assert(0);
  } catch (void *p) {
    assert(p != nullptr);
  }
  return 0;
}
// VERDICT: SUCCESSFUL
