struct Base {};
struct Derived : Base {};

int main() {
  int caught = 0;
  try {
    throw Derived();
  } catch (Derived) {
    caught = 1;
  } catch (Base) {
    caught = 2;
  }
  assert(caught == 2);
  return 0;
}
// VERDICT: FAILED
// PROPERTY: assertion
