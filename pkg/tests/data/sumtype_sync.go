package main

import "fmt"

type Int int
type Bool bool

type Expr interface {
	Visit(v ExprVisitor)
}

type ExprVisitor struct {
	VisitI func(Int)
	VisitB func(Bool)
}

func (i Int) Visit(v ExprVisitor) {
	v.VisitI(i)
}
func (b Bool) Visit(v ExprVisitor) {
	v.VisitB(b)
}

func main() {
	c := make(chan Expr, 2)
	f := make(chan bool, 0)
	d := make(chan bool, 0)
	c <- Int(0)
	c <- Bool(true)
	go A()
	go B()
	// Wait for both goroutines.
	<-f
	<-f
}

func A() {
	fmt.Println((<-c).(Int))
	d <- true // rendezvous on channel d
	// Tell main goroutine I'm done.
	f <- true
}

func B() {
	<-d // rendezvous on channel d
	fmt.Println((<-c).(Bool))
	// Tell main goroutine I'm done.
	f <- true
}
